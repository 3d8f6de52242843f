//! Method dispatch and side-by-side comparison against the CVaR baseline.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alsox::{also_x_with, BisectionConfig};
use crate::alsoxplus::{also_x_plus_with, dc_bisection, AmConfig};
use crate::cvar::solve_cvar_with;
use crate::error::{CcpError, Result};
use crate::lowerlevel::LowerLevelOptions;
use crate::model::{CcpInstance, SolveReport};
use crate::oracle::{oracle_report, DEFAULT_SUBSET_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    AlsoX,
    AlsoXPlus,
    Cvar,
    Dc,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::AlsoX, Method::AlsoXPlus, Method::Cvar, Method::Dc, Method::Oracle];

    pub fn tag(self) -> &'static str {
        match self {
            Method::AlsoX => "alsox",
            Method::AlsoXPlus => "alsoxplus",
            Method::Cvar => "cvar",
            Method::Dc => "dc",
            Method::Oracle => "oracle",
        }
    }
}

impl FromStr for Method {
    type Err = CcpError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| CcpError::validation("method", format!("unknown method \"{s}\" (alsox|alsoxplus|cvar|dc|oracle)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub bisection: BisectionConfig,
    pub am: AmConfig,
    pub lower: LowerLevelOptions,
    pub subset_cap: u128,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            bisection: BisectionConfig::default(),
            am: AmConfig::default(),
            lower: LowerLevelOptions::default(),
            subset_cap: DEFAULT_SUBSET_CAP,
        }
    }
}

pub fn run_method(inst: &CcpInstance, method: Method, cfg: &MethodConfig) -> Result<SolveReport> {
    match method {
        Method::AlsoX => also_x_with(inst, &cfg.bisection, &cfg.lower),
        Method::AlsoXPlus => also_x_plus_with(inst, &cfg.bisection, &cfg.am, &cfg.lower),
        Method::Cvar => solve_cvar_with(inst, &cfg.bisection, &cfg.lower),
        Method::Dc => dc_bisection(inst, &cfg.bisection, &cfg.am),
        Method::Oracle => oracle_report(inst, cfg.subset_cap),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    pub objective: Option<f64>,
    pub feasible: Option<bool>,
    pub violation_prob: Option<f64>,
    pub time: f64,
    /// (v_CVaR − v)/|v_CVaR|·100, present only when CVaR succeeded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
}

/// Value orderings guaranteed on convex X, checked within δ₁.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alsox_le_cvar: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alsoxplus_le_alsox: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_le_methods: Option<bool>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency: Option<Consistency>,
}

pub fn improvement_pct(cvar: f64, value: f64) -> Option<f64> {
    (cvar != 0.0 && cvar.is_finite() && value.is_finite()).then(|| (cvar - value) / cvar.abs() * 100.0)
}

fn row_of(method: Method, res: Result<SolveReport>, time: f64) -> CompareRow {
    match res {
        Ok(r) => CompareRow {
            method,
            objective: Some(r.objective),
            feasible: Some(r.feasible),
            violation_prob: Some(r.violation_prob),
            time,
            improvement_pct: None,
            error: None,
            error_kind: None,
        },
        Err(e) => CompareRow {
            method,
            objective: None,
            feasible: None,
            violation_prob: None,
            time,
            improvement_pct: None,
            error_kind: Some(e.kind().to_string()),
            error: Some(e.to_string()),
        },
    }
}

/// Runs each method (up to `threads` at once) and assembles rows in request order.
pub fn compare(inst: &CcpInstance, methods: &[Method], cfg: &MethodConfig, threads: usize) -> CompareReport {
    let threads = threads.max(1);
    let mut rows: Vec<CompareRow> = Vec::with_capacity(methods.len());
    for chunk in methods.chunks(threads) {
        let done: Vec<CompareRow> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&m| {
                    scope.spawn(move || {
                        let start = Instant::now();
                        let res = run_method(inst, m, cfg);
                        row_of(m, res, start.elapsed().as_secs_f64())
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("method thread panicked")).collect()
        });
        rows.extend(done);
    }
    let value = |m: Method, rows: &[CompareRow]| rows.iter().find(|r| r.method == m).and_then(|r| r.objective);
    if let Some(cv) = value(Method::Cvar, &rows) {
        for r in rows.iter_mut().filter(|r| r.method != Method::Cvar) {
            r.improvement_pct = r.objective.and_then(|v| improvement_pct(cv, v));
        }
    }
    let consistency = (!inst.x_set.is_binary()).then(|| {
        let tol = cfg.bisection.delta1 + 1e-9;
        let le = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a <= b + tol);
        let alsox_le_cvar = le(value(Method::AlsoX, &rows), value(Method::Cvar, &rows));
        let alsoxplus_le_alsox = le(value(Method::AlsoXPlus, &rows), value(Method::AlsoX, &rows));
        let oracle_le_methods = value(Method::Oracle, &rows).map(|v| {
            rows.iter().filter(|r| r.method != Method::Oracle).filter_map(|r| r.objective).all(|o| v <= o + tol)
        });
        let holds = [alsox_le_cvar, alsoxplus_le_alsox, oracle_le_methods].iter().all(|c| c.unwrap_or(true));
        Consistency { alsox_le_cvar, alsoxplus_le_alsox, oracle_le_methods, holds }
    });
    CompareReport { rows, consistency }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn triangle_improvements() {
        let cfg = MethodConfig {
            bisection: BisectionConfig::with_delta1(1e-3),
            am: AmConfig { delta2: 1e-3, ..Default::default() },
            ..Default::default()
        };
        let rep = compare(&catalog::symmetric_triangle(), &[Method::Cvar, Method::AlsoX, Method::AlsoXPlus], &cfg, 2);
        assert_eq!(rep.rows.len(), 3);
        let plus = rep.rows[2].improvement_pct.unwrap();
        assert!((plus - 25.0).abs() < 0.5, "{plus}");
        assert!(rep.rows[1].improvement_pct.unwrap().abs() < 0.5);
        assert!(rep.consistency.unwrap().holds);
    }

    #[test]
    fn cvar_failure_drops_improvements() {
        let rep = compare(&catalog::divergent_bisection(), &[Method::Cvar, Method::Oracle], &MethodConfig::default(), 1);
        assert!(rep.rows[0].error.is_some());
        assert!(rep.rows[1].improvement_pct.is_none() && rep.rows[1].objective.is_some());
    }

    #[test]
    fn method_names() {
        assert_eq!("alsoxplus".parse::<Method>().unwrap(), Method::AlsoXPlus);
        assert!("nosuch".parse::<Method>().is_err());
    }
}
