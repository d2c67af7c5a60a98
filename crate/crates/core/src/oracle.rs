//! Learning-free witness schedule for the hunting/free-time comparisons.
//!
//! The greedy schedule hunts only when the store cannot carry the group
//! through today plus a full hunt, and spends every other day on culture.
//! Comparing its hunt counts, free days and attainable complexity across
//! environments checks the ordering claims directly.

use serde::Serialize;

use crate::env::{Action, EnvParams, EnvState};

/// Result of one greedy schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GreedyOutcome {
    /// Completed hunts.
    pub hunts: u32,
    /// `hunt_days * hunts`.
    pub hunting_days: u32,
    /// Days spent on culture.
    pub free_days: u32,
    pub attainable_culture: u32,
    pub survived: bool,
}

fn survives_days(mut food: f64, days: u32, params: &EnvParams) -> bool {
    for _ in 0..days {
        let balance = food - params.consumption;
        if balance < 0.0 {
            return false;
        }
        food = balance * (1.0 - params.spoilage);
    }
    true
}

/// The greedy rule applied to a live environment state: hunt when the store
/// cannot cover today plus a full hunt (or the rest of the horizon).
pub fn greedy_action(state: &EnvState, params: &EnvParams) -> Action {
    let remaining = params.horizon.saturating_sub(state.day);
    let lookahead = (params.hunt_days + 1).min(remaining);
    if survives_days(state.food, lookahead, params) {
        Action::Culture
    } else {
        Action::Hunt
    }
}

/// Greedy schedule with yield fixed at `Y` (no skill, no culture feedback).
pub fn greedy_run(params: &EnvParams) -> GreedyOutcome {
    greedy_run_with_feedback(params, false)
}

/// Greedy schedule; with `feedback` the hunt yield grows with accumulated
/// culture as `Y (1 + 0.01 C)`.
pub fn greedy_run_with_feedback(params: &EnvParams, feedback: bool) -> GreedyOutcome {
    let horizon = params.horizon;
    let hunt_days = params.hunt_days;
    let mut food = params.initial_food;
    let mut day = 0u32;
    let mut hunts = 0u32;
    let mut culture = 0u32;
    let mut survived = true;

    let next_day = |food: f64| {
        let balance = food - params.consumption;
        (balance * (1.0 - params.spoilage), balance >= 0.0)
    };

    while day < horizon {
        let remaining = horizon - day;
        let lookahead = (hunt_days + 1).min(remaining);
        if survives_days(food, lookahead, params) {
            let (next, ok) = next_day(food);
            debug_assert!(ok);
            food = next;
            day += 1;
            culture += 1;
            continue;
        }
        // must hunt now; the kill arrives only if every hunting day is survived
        // and the hunt finishes inside the horizon
        let days = hunt_days.min(remaining);
        for _ in 0..days {
            let (next, ok) = next_day(food);
            food = next;
            day += 1;
            if !ok {
                survived = false;
                break;
            }
        }
        if !survived {
            break;
        }
        if days == hunt_days {
            hunts += 1;
            let multiplier = if feedback { 1.0 + 0.01 * f64::from(culture) } else { 1.0 };
            food += params.yield_base * multiplier;
        }
    }

    GreedyOutcome {
        hunts,
        hunting_days: hunts * hunt_days,
        free_days: culture,
        attainable_culture: culture,
        survived,
    }
}

/// `n_yield x n_spoilage` grid of `(Y, p)` pairs, endpoints included.
pub fn grid(yield_range: (f64, f64), spoilage_range: (f64, f64), n_yield: usize, n_spoilage: usize) -> Vec<(f64, f64)> {
    let lin = |(lo, hi): (f64, f64), n: usize, i: usize| {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n_yield * n_spoilage);
    for i in 0..n_yield {
        for j in 0..n_spoilage {
            out.push((lin(yield_range, n_yield, i), lin(spoilage_range, n_spoilage, j)));
        }
    }
    out
}

/// 10 x 10 grid over `Y in [1000, 3000]`, `p in [0.2, 0.5]`.
pub fn default_grid() -> Vec<(f64, f64)> {
    grid((1000.0, 3000.0), (0.2, 0.5), 10, 10)
}

/// Minimum yield and spoilage gaps at which the ordering must be strict.
pub const STRICT_YIELD_GAP: f64 = 500.0;
pub const STRICT_SPOILAGE_GAP: f64 = 0.1;
const GAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// `(Y, p)` of the more favourable environment.
    pub favoured: (f64, f64),
    pub other: (f64, f64),
    pub favoured_value: f64,
    pub other_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub pairs_checked: usize,
    pub violations: Vec<Violation>,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OracleReport {
    pub rows: Vec<CheckRow>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(CheckRow::passed)
    }

    pub fn total_violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations.len()).sum()
    }

    pub fn extend(&mut self, other: OracleReport) {
        self.rows.extend(other.rows);
    }

    /// Fixed-width pass/fail table.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<54} {:>8} {:>11}  {}\n", "check", "pairs", "violations", "result");
        for row in &self.rows {
            out.push_str(&format!(
                "{:<44} {:>8} {:>11}  {}\n",
                row.name,
                row.pairs_checked,
                row.violations.len(),
                if row.passed() { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

struct Evaluated {
    point: (f64, f64),
    outcome: GreedyOutcome,
}

fn evaluate_grid(base: &EnvParams, grid: &[(f64, f64)]) -> Vec<Evaluated> {
    grid.iter()
        .map(|&(y, p)| {
            let params = EnvParams {
                yield_base: y,
                spoilage: p,
                ..base.clone()
            };
            Evaluated {
                point: (y, p),
                outcome: greedy_run(&params),
            }
        })
        .collect()
}

fn qualifies(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 > b.0 && a.1 < b.1
}

fn separated(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 - b.0 >= STRICT_YIELD_GAP - GAP_TOLERANCE && b.1 - a.1 >= STRICT_SPOILAGE_GAP - GAP_TOLERANCE
}

/// Compares `value` over every qualifying pair. `better(favoured, other)`
/// is the expected relation; the strict row restricts to separated pairs.
fn compare_pairs(
    evaluated: &[Evaluated],
    name: &str,
    value: impl Fn(&GreedyOutcome) -> f64,
    weak: impl Fn(f64, f64) -> bool,
    strict: impl Fn(f64, f64) -> bool,
) -> [CheckRow; 2] {
    let mut weak_row = CheckRow {
        name: format!("{name} (all qualifying pairs)"),
        pairs_checked: 0,
        violations: Vec::new(),
    };
    let mut strict_row = CheckRow {
        name: format!("{name} (strict, separated pairs)"),
        pairs_checked: 0,
        violations: Vec::new(),
    };
    for a in evaluated {
        for b in evaluated {
            if !qualifies(a.point, b.point) {
                continue;
            }
            let (va, vb) = (value(&a.outcome), value(&b.outcome));
            let violation = || Violation {
                favoured: a.point,
                other: b.point,
                favoured_value: va,
                other_value: vb,
            };
            weak_row.pairs_checked += 1;
            if !weak(va, vb) {
                weak_row.violations.push(violation());
            }
            if separated(a.point, b.point) {
                strict_row.pairs_checked += 1;
                if !strict(va, vb) {
                    strict_row.violations.push(violation());
                }
            }
        }
    }
    [weak_row, strict_row]
}

/// Higher yield and lower spoilage never need more hunts.
pub fn check_hunting_order(base: &EnvParams, grid: &[(f64, f64)]) -> OracleReport {
    let evaluated = evaluate_grid(base, grid);
    let rows = compare_pairs(
        &evaluated,
        "hunts H_A <= H_B",
        |o| f64::from(o.hunts),
        |a, b| a <= b,
        |a, b| a < b,
    );
    OracleReport { rows: rows.to_vec() }
}

/// Free days and attainable complexity never shrink in the favourable
/// environment, and culture feedback never lowers attainable complexity.
pub fn check_culture_order(base: &EnvParams, grid: &[(f64, f64)]) -> OracleReport {
    let evaluated = evaluate_grid(base, grid);
    let mut rows = Vec::new();
    rows.extend(compare_pairs(
        &evaluated,
        "free days A >= free days B",
        |o| f64::from(o.free_days),
        |a, b| a >= b,
        |a, b| a > b,
    ));
    rows.extend(compare_pairs(
        &evaluated,
        "attainable C_A >= C_B",
        |o| f64::from(o.attainable_culture),
        |a, b| a >= b,
        |a, b| a > b,
    ));

    let mut feedback_row = CheckRow {
        name: "feedback on: C never below feedback off".to_string(),
        pairs_checked: 0,
        violations: Vec::new(),
    };
    for e in &evaluated {
        let params = EnvParams {
            yield_base: e.point.0,
            spoilage: e.point.1,
            ..base.clone()
        };
        let on = greedy_run_with_feedback(&params, true);
        feedback_row.pairs_checked += 1;
        if on.attainable_culture < e.outcome.attainable_culture {
            feedback_row.violations.push(Violation {
                favoured: e.point,
                other: e.point,
                favoured_value: f64::from(on.attainable_culture),
                other_value: f64::from(e.outcome.attainable_culture),
            });
        }
    }
    rows.push(feedback_row);
    OracleReport { rows }
}

/// Both checks on one grid.
pub fn verify_grid(base: &EnvParams, grid: &[(f64, f64)]) -> OracleReport {
    let mut report = check_hunting_order(base, grid);
    report.extend(check_culture_order(base, grid));
    report
}
