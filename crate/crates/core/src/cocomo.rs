//! Basic/intermediate COCOMO-81 estimator.
//!
//! ```text
//! E = a * KLOC^b * EAF      effort, person-months
//! D = c * E^d               schedule, months
//! P = E / D                 people
//! C = P * D * CP            cost
//! ```
//!
//! EAF is the product of the fifteen cost-driver multipliers.

use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    VeryLow,
    Low,
    Nominal,
    High,
    VeryHigh,
    ExtraHigh,
}

impl Rating {
    pub const ALL: [Rating; 6] =
        [Rating::VeryLow, Rating::Low, Rating::Nominal, Rating::High, Rating::VeryHigh, Rating::ExtraHigh];

    fn column(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Rating> {
        match s {
            "very_low" | "vl" => Some(Rating::VeryLow),
            "low" | "l" => Some(Rating::Low),
            "nominal" | "n" => Some(Rating::Nominal),
            "high" | "h" => Some(Rating::High),
            "very_high" | "vh" => Some(Rating::VeryHigh),
            "extra_high" | "xh" => Some(Rating::ExtraHigh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostDriver {
    RequiredReliability,
    DatabaseSize,
    ProductComplexity,
    RuntimePerformance,
    MemoryConstraints,
    VirtualMachineVolatility,
    TurnaroundTime,
    AnalystCapability,
    ApplicationsExperience,
    EngineerCapability,
    VirtualMachineExperience,
    LanguageExperience,
    ModernPractices,
    SoftwareTools,
    DevelopmentSchedule,
}

impl CostDriver {
    pub const ALL: [CostDriver; 15] = [
        CostDriver::RequiredReliability,
        CostDriver::DatabaseSize,
        CostDriver::ProductComplexity,
        CostDriver::RuntimePerformance,
        CostDriver::MemoryConstraints,
        CostDriver::VirtualMachineVolatility,
        CostDriver::TurnaroundTime,
        CostDriver::AnalystCapability,
        CostDriver::ApplicationsExperience,
        CostDriver::EngineerCapability,
        CostDriver::VirtualMachineExperience,
        CostDriver::LanguageExperience,
        CostDriver::ModernPractices,
        CostDriver::SoftwareTools,
        CostDriver::DevelopmentSchedule,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CostDriver::RequiredReliability => "Required software reliability",
            CostDriver::DatabaseSize => "Size of application database",
            CostDriver::ProductComplexity => "Complexity of the product",
            CostDriver::RuntimePerformance => "Run-time performance constraints",
            CostDriver::MemoryConstraints => "Memory constraints",
            CostDriver::VirtualMachineVolatility => "Volatility of the virtual machine environment",
            CostDriver::TurnaroundTime => "Required turnabout time",
            CostDriver::AnalystCapability => "Analyst capability",
            CostDriver::ApplicationsExperience => "Applications experience",
            CostDriver::EngineerCapability => "Software engineer capability",
            CostDriver::VirtualMachineExperience => "Virtual machine experience",
            CostDriver::LanguageExperience => "Programming language experience",
            CostDriver::ModernPractices => "Application of software engineering methods",
            CostDriver::SoftwareTools => "Use of software tools",
            CostDriver::DevelopmentSchedule => "Required development schedule",
        }
    }

    /// Short key used on the command line.
    pub fn key(self) -> &'static str {
        match self {
            CostDriver::RequiredReliability => "rely",
            CostDriver::DatabaseSize => "data",
            CostDriver::ProductComplexity => "cplx",
            CostDriver::RuntimePerformance => "time",
            CostDriver::MemoryConstraints => "stor",
            CostDriver::VirtualMachineVolatility => "virt",
            CostDriver::TurnaroundTime => "turn",
            CostDriver::AnalystCapability => "acap",
            CostDriver::ApplicationsExperience => "aexp",
            CostDriver::EngineerCapability => "pcap",
            CostDriver::VirtualMachineExperience => "vexp",
            CostDriver::LanguageExperience => "lexp",
            CostDriver::ModernPractices => "modp",
            CostDriver::SoftwareTools => "tool",
            CostDriver::DevelopmentSchedule => "sced",
        }
    }

    pub fn from_key(key: &str) -> Option<CostDriver> {
        CostDriver::ALL.into_iter().find(|d| d.key() == key)
    }

    fn index(self) -> usize {
        self as usize
    }

    /// Multiplier for `rating`, or `None` where the grid has no entry.
    pub fn multiplier(self, rating: Rating) -> Option<f64> {
        MULTIPLIERS[self.index()][rating.column()]
    }
}

/// Cost-driver grid, columns very low .. extra high.
pub const MULTIPLIERS: [[Option<f64>; 6]; 15] = [
    [Some(0.75), Some(0.88), Some(1.0), Some(1.15), Some(1.4), None],
    [None, Some(0.94), Some(1.0), Some(1.08), Some(1.16), None],
    [Some(0.7), Some(0.85), Some(1.0), Some(1.15), Some(1.3), Some(1.65)],
    [None, None, Some(1.0), Some(1.11), Some(1.3), Some(1.66)],
    [None, None, Some(1.0), Some(1.06), Some(1.21), Some(1.56)],
    [None, Some(0.87), Some(1.0), Some(1.15), Some(1.3), None],
    [None, Some(0.87), Some(1.0), Some(1.07), Some(1.15), None],
    [Some(1.46), Some(1.19), Some(1.0), Some(0.86), Some(0.71), None],
    [Some(1.29), Some(1.13), Some(1.0), Some(0.91), Some(0.82), None],
    [Some(1.42), Some(1.17), Some(1.0), Some(0.86), Some(0.7), None],
    [Some(1.21), Some(1.1), Some(1.0), Some(0.9), None, None],
    [Some(1.14), Some(1.07), Some(1.0), Some(0.95), None, None],
    [Some(1.24), Some(1.1), Some(1.0), Some(0.91), Some(0.82), None],
    [Some(1.24), Some(1.1), Some(1.0), Some(0.91), Some(0.83), None],
    [Some(1.23), Some(1.08), Some(1.0), Some(1.04), Some(1.1), None],
];

/// One rating per cost driver, indexed in [`CostDriver::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverRatings(pub [Rating; 15]);

impl Default for DriverRatings {
    fn default() -> Self {
        DriverRatings([Rating::Nominal; 15])
    }
}

impl DriverRatings {
    pub fn nominal() -> DriverRatings {
        DriverRatings::default()
    }

    pub fn with(mut self, driver: CostDriver, rating: Rating) -> DriverRatings {
        self.0[driver.index()] = rating;
        self
    }

    pub fn get(&self, driver: CostDriver) -> Rating {
        self.0[driver.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum CocomoError {
    #[error("{driver:?} has no multiplier for rating {rating:?}")]
    UndefinedCell { driver: CostDriver, rating: Rating },
    #[error("KLOC must be positive, got {0}")]
    NonPositiveKloc(f64),
    #[error("EAF must be positive, got {0}")]
    NonPositiveEaf(f64),
    #[error("cost per person-month must be finite and non-negative, got {0}")]
    BadCostRate(f64),
}

/// Effort adjustment factor: product of the fifteen multipliers.
pub fn eaf(ratings: &DriverRatings) -> Result<f64, CocomoError> {
    CostDriver::ALL.into_iter().try_fold(1.0, |acc, driver| {
        let rating = ratings.get(driver);
        driver
            .multiplier(rating)
            .map(|m| acc * m)
            .ok_or(CocomoError::UndefinedCell { driver, rating })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Organic,
    Semidetached,
    Embedded,
}

/// Mode coefficients `(a, b, c, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mode {
    pub fn coefficients(self) -> Coefficients {
        match self {
            Mode::Organic => Coefficients { a: 3.2, b: 1.05, c: 2.5, d: 0.38 },
            Mode::Semidetached => Coefficients { a: 3.0, b: 1.12, c: 2.5, d: 0.35 },
            Mode::Embedded => Coefficients { a: 2.8, b: 1.20, c: 2.5, d: 0.32 },
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "organic" => Some(Mode::Organic),
            "semidetached" | "semi-detached" => Some(Mode::Semidetached),
            "embedded" => Some(Mode::Embedded),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocomoInput {
    pub kloc: f64,
    pub coefficients: Coefficients,
    pub eaf: f64,
    pub cost_per_pm: f64,
}

impl CocomoInput {
    pub fn organic(kloc: f64, eaf: f64, cost_per_pm: f64) -> CocomoInput {
        CocomoInput { kloc, coefficients: Mode::Organic.coefficients(), eaf, cost_per_pm }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocomoResult {
    pub effort_pm: f64,
    pub schedule_months: f64,
    pub people: f64,
    pub cost: f64,
}

pub fn estimate(input: &CocomoInput) -> Result<CocomoResult, CocomoError> {
    if input.kloc <= 0.0 || !input.kloc.is_finite() {
        return Err(CocomoError::NonPositiveKloc(input.kloc));
    }
    if input.eaf <= 0.0 || !input.eaf.is_finite() {
        return Err(CocomoError::NonPositiveEaf(input.eaf));
    }
    if input.cost_per_pm < 0.0 || !input.cost_per_pm.is_finite() {
        return Err(CocomoError::BadCostRate(input.cost_per_pm));
    }
    let Coefficients { a, b, c, d } = input.coefficients;
    let effort_pm = a * libm::pow(input.kloc, b) * input.eaf;
    let schedule_months = c * libm::pow(effort_pm, d);
    let people = effort_pm / schedule_months;
    let cost = effort_pm * input.cost_per_pm;
    Ok(CocomoResult { effort_pm, schedule_months, people, cost })
}

/// Renders the result block with the row labels used in cost reports.
pub struct Report<'a> {
    pub input: &'a CocomoInput,
    pub result: &'a CocomoResult,
}

impl fmt::Display for Report<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.input;
        let r = self.result;
        writeln!(f, "EAF (effort adjustment factor) = {:.4}", i.eaf)?;
        writeln!(f, "KLOC (number of lines, thousands) = {}", i.kloc)?;
        writeln!(f, "a (coefficient) = {}", i.coefficients.a)?;
        writeln!(f, "b (coefficient) = {}", i.coefficients.b)?;
        writeln!(f, "E (effort applied, person-months) = {:.2}", r.effort_pm)?;
        writeln!(f, "c (coefficient) = {}", i.coefficients.c)?;
        writeln!(f, "d (coefficient) = {}", i.coefficients.d)?;
        writeln!(f, "D (development time, months) = {:.2}", r.schedule_months)?;
        writeln!(f, "P (people required) = {:.2}", r.people)?;
        writeln!(f, "CP (cost per person-month, dollars) = {}", i.cost_per_pm)?;
        write!(f, "C (cost of project, dollars) = {:.2}", r.cost)
    }
}
