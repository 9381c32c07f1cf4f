use crate::{BoxError, Error, Result};

/// Something that reports peak resource use since the last reset, e.g. a
/// device allocator's high-water mark.
pub trait ResourceMeter {
    fn reset(&mut self) -> Result<()>;
    fn peak(&self) -> Result<f64>;
}

/// Returned by [`TrackedMeter::alloc`] when a capacity is configured and the
/// request would exceed it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("out of budget: requested {requested} with {in_use} in use of capacity {capacity}")]
pub struct OutOfBudget {
    pub requested: u64,
    pub in_use: u64,
    pub capacity: u64,
}

/// Counting allocator for workloads that report their own allocations.
#[derive(Debug, Clone, Default)]
pub struct TrackedMeter {
    current: u64,
    peak: u64,
    capacity: Option<u64>,
}

impl TrackedMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: u64) -> Self {
        Self { capacity: Some(capacity), ..Self::default() }
    }

    pub fn alloc(&mut self, units: u64) -> Result<(), OutOfBudget> {
        let next = self.current.saturating_add(units);
        if let Some(capacity) = self.capacity {
            if next > capacity {
                return Err(OutOfBudget { requested: units, in_use: self.current, capacity });
            }
        }
        self.current = next;
        self.peak = self.peak.max(next);
        Ok(())
    }

    pub fn free(&mut self, units: u64) {
        self.current = self.current.saturating_sub(units);
    }

    pub fn current(&self) -> u64 {
        self.current
    }
}

impl ResourceMeter for TrackedMeter {
    fn reset(&mut self) -> Result<()> {
        self.current = 0;
        self.peak = 0;
        Ok(())
    }

    fn peak(&self) -> Result<f64> {
        Ok(self.peak as f64)
    }
}

/// Adapts a pair of closures (e.g. wrappers around a device runtime) into a
/// meter. Callback failures surface as configuration errors.
pub struct CallbackMeter<R, P> {
    reset: R,
    peak: P,
}

impl<R, P> CallbackMeter<R, P>
where
    R: FnMut() -> Result<(), BoxError>,
    P: Fn() -> Result<f64, BoxError>,
{
    pub fn new(reset: R, peak: P) -> Self {
        Self { reset, peak }
    }
}

impl<R, P> ResourceMeter for CallbackMeter<R, P>
where
    R: FnMut() -> Result<(), BoxError>,
    P: Fn() -> Result<f64, BoxError>,
{
    fn reset(&mut self) -> Result<()> {
        (self.reset)().map_err(|e| Error::Config(format!("meter reset failed: {e}")))
    }

    fn peak(&self) -> Result<f64> {
        (self.peak)().map_err(|e| Error::Config(format!("meter read failed: {e}")))
    }
}
