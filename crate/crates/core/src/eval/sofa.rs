//! Sequential organ failure assessment from 24-hour worst values.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Worst values of a 24-hour window; absent fields are `None`.
///
/// Units: mmHg for pressures and the P/F ratio, ×10³/µl for platelets, mg/dl
/// for bilirubin and creatinine, ml/day for urine output, µg/kg/min for doses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SofaInput {
    pub stay_id: String,
    pub gcs_total: Option<f64>,
    pub gcs_eye: Option<f64>,
    pub gcs_motor: Option<f64>,
    pub gcs_verbal: Option<f64>,
    pub map: Option<f64>,
    pub sbp: Option<f64>,
    pub dbp: Option<f64>,
    pub dopamine: Option<f64>,
    pub dobutamine: Option<f64>,
    pub epinephrine: Option<f64>,
    pub norepinephrine: Option<f64>,
    pub pao2_fio2: Option<f64>,
    pub mechanical_ventilation: Option<bool>,
    pub platelets: Option<f64>,
    pub bilirubin: Option<f64>,
    pub creatinine: Option<f64>,
    pub urine_output: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SofaScore {
    pub cns: u8,
    pub cardio: u8,
    pub resp: u8,
    pub coag: u8,
    pub liver: u8,
    pub renal: u8,
}

impl SofaScore {
    pub fn total(&self) -> u8 {
        self.cns + self.cardio + self.resp + self.coag + self.liver + self.renal
    }
}

impl SofaInput {
    fn check(&self) -> Result<()> {
        let fields = [
            ("gcs_total", self.gcs_total),
            ("gcs_eye", self.gcs_eye),
            ("gcs_motor", self.gcs_motor),
            ("gcs_verbal", self.gcs_verbal),
            ("map", self.map),
            ("sbp", self.sbp),
            ("dbp", self.dbp),
            ("dopamine", self.dopamine),
            ("dobutamine", self.dobutamine),
            ("epinephrine", self.epinephrine),
            ("norepinephrine", self.norepinephrine),
            ("pao2_fio2", self.pao2_fio2),
            ("platelets", self.platelets),
            ("bilirubin", self.bilirubin),
            ("creatinine", self.creatinine),
            ("urine_output", self.urine_output),
        ];
        for (name, v) in fields {
            if let Some(v) = v {
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::data(format!("{}: {name} = {v} is not a valid physiologic value", self.stay_id)));
                }
            }
        }
        Ok(())
    }

    /// Given GCS total, else the sum of the three components, clamped to [3, 15].
    pub fn gcs(&self) -> Option<f64> {
        let total = match (self.gcs_total, self.gcs_eye, self.gcs_motor, self.gcs_verbal) {
            (Some(t), ..) => t,
            (None, Some(e), Some(m), Some(v)) => e + m + v,
            _ => return None,
        };
        Some(total.clamp(3.0, 15.0))
    }

    /// Given MAP, else `(SBP + 2·DBP)/3`.
    pub fn mean_arterial_pressure(&self) -> Option<f64> {
        self.map.or(match (self.sbp, self.dbp) {
            (Some(s), Some(d)) => Some((s + 2.0 * d) / 3.0),
            _ => None,
        })
    }
}

fn cns(gcs: f64) -> u8 {
    match gcs {
        g if g >= 15.0 => 0,
        g if g >= 13.0 => 1,
        g if g >= 10.0 => 2,
        g if g >= 6.0 => 3,
        _ => 4,
    }
}

fn cardio(inp: &SofaInput) -> u8 {
    let dopa = inp.dopamine.unwrap_or(0.0);
    let dobu = inp.dobutamine.unwrap_or(0.0);
    let epi = inp.epinephrine.unwrap_or(0.0);
    let norepi = inp.norepinephrine.unwrap_or(0.0);
    if dopa > 15.0 || epi > 0.1 || norepi > 0.1 {
        4
    } else if dopa > 5.0 || epi > 0.0 || norepi > 0.0 {
        3
    } else if dopa > 0.0 || dobu > 0.0 {
        2
    } else if inp.mean_arterial_pressure().is_some_and(|m| m < 70.0) {
        1
    } else {
        0
    }
}

fn resp(pf: f64, ventilated: bool) -> u8 {
    if pf < 100.0 && ventilated {
        4
    } else if pf < 200.0 && ventilated {
        3
    } else if pf < 300.0 {
        2
    } else if pf < 400.0 {
        1
    } else {
        0
    }
}

fn coag(platelets: f64) -> u8 {
    match platelets {
        p if p < 20.0 => 4,
        p if p < 50.0 => 3,
        p if p < 100.0 => 2,
        p if p < 150.0 => 1,
        _ => 0,
    }
}

fn liver(bilirubin: f64) -> u8 {
    match bilirubin {
        b if b >= 12.0 => 4,
        b if b >= 6.0 => 3,
        b if b >= 2.0 => 2,
        b if b >= 1.2 => 1,
        _ => 0,
    }
}

fn renal(creatinine: Option<f64>, urine: Option<f64>) -> u8 {
    let by_creat = match creatinine {
        Some(c) if c >= 5.0 => 4,
        Some(c) if c >= 3.5 => 3,
        Some(c) if c >= 2.0 => 2,
        Some(c) if c >= 1.2 => 1,
        _ => 0,
    };
    let by_urine = match urine {
        Some(u) if u < 200.0 => 4,
        Some(u) if u < 500.0 => 3,
        _ => 0,
    };
    by_creat.max(by_urine)
}

/// Six subscores; a subsystem without data scores 0.
pub fn sofa_score(inp: &SofaInput) -> Result<SofaScore> {
    inp.check()?;
    Ok(SofaScore {
        cns: inp.gcs().map_or(0, cns),
        cardio: cardio(inp),
        resp: inp
            .pao2_fio2
            .map_or(0, |pf| resp(pf, inp.mechanical_ventilation.unwrap_or(false))),
        coag: inp.platelets.map_or(0, coag),
        liver: inp.bilirubin.map_or(0, liver),
        renal: renal(inp.creatinine, inp.urine_output),
    })
}

/// Writes `stay_id,cns,cardio,resp,coag,liver,renal,total` rows.
pub fn write_sofa_csv<W: Write>(out: W, inputs: &[SofaInput]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stay_id", "cns", "cardio", "resp", "coag", "liver", "renal", "total"])?;
    for inp in inputs {
        let s = sofa_score(inp)?;
        w.write_record([
            inp.stay_id.clone(),
            s.cns.to_string(),
            s.cardio.to_string(),
            s.resp.to_string(),
            s.coag.to_string(),
            s.liver.to_string(),
            s.renal.to_string(),
            s.total().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
