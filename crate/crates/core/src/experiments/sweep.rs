use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{run_step_datum, Resolution};
use crate::error::{Error, Result};
use crate::selfsimilar::{fit_front_exponent, fit_tail_exponent, locate_free_boundary, StepDatum};

/// Outcome for one `(s, L, P1, P2)` tuple. A failed free-boundary search is
/// recorded in `error` rather than aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub s: f64,
    pub latent_heat: f64,
    pub p1: f64,
    pub p2: f64,
    pub dx: f64,
    pub domain_radius: f64,
    pub t_extract: f64,
    pub xi0: Option<f64>,
    pub xi0_fine_threshold: Option<f64>,
    pub tail_exponent: Option<f64>,
    pub front_exponent: Option<f64>,
    pub error: Option<String>,
    pub flags: BTreeMap<String, bool>,
}

pub fn sweep_record(s: f64, datum: StepDatum, res: &Resolution, t_extract: f64) -> Result<SweepRecord> {
    let run = run_step_datum(s, datum, res, &[t_extract])?;
    let profile = &run.profiles[0];
    let mut record = SweepRecord {
        s,
        latent_heat: datum.latent_heat,
        p1: datum.p1,
        p2: datum.p2,
        dx: res.dx,
        domain_radius: res.radius,
        t_extract,
        xi0: None,
        xi0_fine_threshold: None,
        tail_exponent: None,
        front_exponent: None,
        error: None,
        flags: BTreeMap::new(),
    };
    match locate_free_boundary(profile, None) {
        Ok(fb) => {
            record.xi0 = Some(fb.xi0);
            record.xi0_fine_threshold = Some(fb.xi0_fine_threshold);
            record.flags.insert("xi0_positive".into(), fb.xi0 > 0.0);
            record.tail_exponent = fit_tail_exponent(profile, fb.xi0).ok().map(|f| f.exponent);
            record.front_exponent = fit_front_exponent(profile, fb.xi0, 0.2).ok().map(|f| f.exponent);
        }
        Err(e @ (Error::NoWater { .. } | Error::WindowTooSmall { .. })) => record.error = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P2Sweep {
    pub records: Vec<SweepRecord>,
    /// Per `s`: ξ₀ nonincreasing along the sorted `P2` list.
    pub monotone: Vec<(f64, bool)>,
}

fn check_sorted_positive(values: &[f64], field: &'static str) -> Result<()> {
    if values.iter().any(|&v| !(v > 0.0)) || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(field, "values must be positive and strictly increasing"));
    }
    Ok(())
}

fn nonincreasing(values: &[Option<f64>]) -> bool {
    let known: Vec<f64> = values.iter().flatten().copied().collect();
    known.windows(2).all(|w| w[1] <= w[0])
}

pub fn sweep_xi0_vs_p2(
    s_list: &[f64],
    p2_list: &[f64],
    latent_heat: f64,
    p1: f64,
    res: &Resolution,
    t_extract: f64,
) -> Result<P2Sweep> {
    check_sorted_positive(p2_list, "P2")?;
    let mut records = Vec::new();
    let mut monotone = Vec::new();
    for &s in s_list {
        let start = records.len();
        for &p2 in p2_list {
            records.push(sweep_record(s, StepDatum::new(latent_heat, p1, p2)?, res, t_extract)?);
        }
        let xi0: Vec<Option<f64>> = records[start..].iter().map(|r| r.xi0).collect();
        monotone.push((s, nonincreasing(&xi0)));
    }
    Ok(P2Sweep { records, monotone })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SSweep {
    pub records: Vec<SweepRecord>,
    /// Per `P2`: the smallest `s` gives the smallest ξ₀.
    pub minimum_at_smallest_s: Vec<(f64, bool)>,
}

pub fn sweep_xi0_vs_s(
    s_grid: &[f64],
    p2_list: &[f64],
    latent_heat: f64,
    p1: f64,
    res: &Resolution,
    t_extract: f64,
) -> Result<SSweep> {
    if s_grid.iter().any(|&s| !(s > 0.0 && s < 1.0)) || s_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("s", "grid must be strictly increasing inside (0, 1)"));
    }
    check_sorted_positive(p2_list, "P2")?;
    let mut records = Vec::new();
    let mut minimum_at_smallest_s = Vec::new();
    for &p2 in p2_list {
        let start = records.len();
        for &s in s_grid {
            records.push(sweep_record(s, StepDatum::new(latent_heat, p1, p2)?, res, t_extract)?);
        }
        let xi0: Vec<f64> = records[start..].iter().map(|r| r.xi0.unwrap_or(f64::NAN)).collect();
        let first = xi0[0];
        minimum_at_smallest_s.push((p2, first.is_finite() && xi0[1..].iter().all(|&x| !(x < first))));
    }
    Ok(SSweep { records, minimum_at_smallest_s })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], mut out: W) -> Result<()> {
    writeln!(out, "s,L,P1,P2,dx,domain_radius,t_extract,xi0,xi0_fine_threshold,tail_exponent,front_exponent,error")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.s,
            r.latent_heat,
            r.p1,
            r.p2,
            r.dx,
            r.domain_radius,
            r.t_extract,
            opt(r.xi0),
            opt(r.xi0_fine_threshold),
            opt(r.tail_exponent),
            opt(r.front_exponent),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_sweep_is_monotone_on_a_coarse_grid() {
        let res = Resolution::new(0.05, 8.0);
        let sweep = sweep_xi0_vs_p2(&[0.5], &[0.5, 1.0, 2.0], 1.0, 1.0, &res, 1.0).unwrap();
        assert_eq!(sweep.records.len(), 3);
        assert_eq!(sweep.monotone, vec![(0.5, true)]);
        let xi0: Vec<f64> = sweep.records.iter().map(|r| r.xi0.unwrap()).collect();
        assert!(xi0[2] < xi0[0], "{xi0:?}");
    }

    #[test]
    fn unsorted_lists_are_rejected() {
        let res = Resolution::new(0.1, 2.0);
        assert!(sweep_xi0_vs_p2(&[0.5], &[1.0, 0.5], 1.0, 1.0, &res, 1.0).is_err());
        assert!(sweep_xi0_vs_s(&[0.5, 1.0], &[1.0], 1.0, 1.0, &res, 1.0).is_err());
    }

    #[test]
    fn csv_leaves_missing_values_empty() {
        let r = SweepRecord {
            s: 0.5,
            latent_heat: 1.0,
            p1: 1.0,
            p2: 0.25,
            dx: 0.1,
            domain_radius: 2.0,
            t_extract: 1.0,
            xi0: None,
            xi0_fine_threshold: None,
            tail_exponent: None,
            front_exponent: None,
            error: Some("window, too small".into()),
            flags: BTreeMap::new(),
        };
        let mut buf = Vec::new();
        write_sweep_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0.5,1,1,0.25,0.1,2,1,,,,,window; too small");
        assert!(nonincreasing(&[Some(1.0), None, Some(0.5)]));
    }
}
