//! SOFA scores from raw bedside values, written as CSV to stdout.

use cts_forge::eval::{sofa_score, write_sofa_csv, SofaInput};

fn main() -> cts_forge::Result<()> {
    let patients = vec![
        SofaInput { stay_id: "stable".into(), gcs_total: Some(15.0), map: Some(85.0), platelets: Some(210.0), ..SofaInput::default() },
        SofaInput {
            stay_id: "septic".into(),
            sbp: Some(85.0),
            dbp: Some(45.0),
            norepinephrine: Some(0.08),
            pao2_fio2: Some(180.0),
            mechanical_ventilation: Some(true),
            platelets: Some(70.0),
            bilirubin: Some(2.4),
            creatinine: Some(2.2),
            urine_output: Some(380.0),
            ..SofaInput::default()
        },
        SofaInput { stay_id: "high-dose".into(), dopamine: Some(16.0), gcs_eye: Some(2.0), gcs_verbal: Some(2.0), gcs_motor: Some(4.0), ..SofaInput::default() },
    ];
    write_sofa_csv(std::io::stdout(), &patients)?;
    let total = sofa_score(&patients[1])?.total();
    println!("septic total {total}");
    Ok(())
}
