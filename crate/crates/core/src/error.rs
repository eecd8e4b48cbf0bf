use core::fmt;

/// Errors raised by the measurement primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureError {
    /// Every raw weight was zero, nothing to normalize.
    AllZero,
    /// A raw weight was negative (or non-finite).
    NegativeWeight,
    /// Smoothing factor outside the open interval (0, 1).
    InvalidAlpha,
    /// Two distributions did not share the same category count.
    LengthMismatch,
    /// q(c) = 0 where p(c) > 0; the caller skipped smoothing.
    ZeroInQ,
    /// An operation over a population received no distributions.
    EmptyInput,
    /// Normalized entropy is undefined over a single category.
    SingleCategory,
    /// Every user shares one actual preference, so the stereotype
    /// ratio has a zero denominator.
    ZeroActualSpread,
    /// The group's mean actual mass on the category is zero.
    ZeroActualMass,
    /// A Welch test group had fewer than two samples.
    DegenerateGroup,
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            MeasureError::AllZero => "all weights are zero",
            MeasureError::NegativeWeight => "negative or non-finite weight",
            MeasureError::InvalidAlpha => "smoothing alpha must lie in (0, 1)",
            MeasureError::LengthMismatch => "distributions have different category counts",
            MeasureError::ZeroInQ => "q has zero mass where p is positive (smooth first)",
            MeasureError::EmptyInput => "empty input population",
            MeasureError::SingleCategory => "entropy is undefined over a single category",
            MeasureError::ZeroActualSpread => "actual preferences have zero spread",
            MeasureError::ZeroActualMass => "group has zero actual mass on the category",
            MeasureError::DegenerateGroup => "group has fewer than two samples",
        };
        f.write_str(msg)
    }
}

impl core::error::Error for MeasureError {}
