//! Rate newtypes. T₂ quantities are quoted per microsecond and T₁
//! quantities per second; keeping them apart in the type system makes the
//! conversion explicit.

/// A rate in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PerSecond(pub f64);

/// A rate in μs⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PerMicrosecond(pub f64);

impl PerSecond {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Characteristic time 1/rate in seconds.
    pub fn time_s(self) -> f64 {
        1.0 / self.0
    }

    pub fn to_per_microsecond(self) -> PerMicrosecond {
        PerMicrosecond(self.0 * 1e-6)
    }
}

impl PerMicrosecond {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Characteristic time 1/rate in microseconds.
    pub fn time_us(self) -> f64 {
        1.0 / self.0
    }

    pub fn to_per_second(self) -> PerSecond {
        PerSecond(self.0 * 1e6)
    }
}

impl From<PerMicrosecond> for PerSecond {
    fn from(r: PerMicrosecond) -> Self {
        r.to_per_second()
    }
}

impl From<PerSecond> for PerMicrosecond {
    fn from(r: PerSecond) -> Self {
        r.to_per_microsecond()
    }
}
