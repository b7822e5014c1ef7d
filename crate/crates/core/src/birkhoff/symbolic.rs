use super::energy::LinearForms;
use super::system::BirkhoffSystem;
use crate::config::linear_combination;
use crate::exact::Rational;

/// Q_j as text for linear systems, e.g. `Q2 = 2*qdd2 - q1 + q2 + 1/3 + v(S1)`.
pub fn symbolic_q(sys: &BirkhoffSystem) -> Option<Vec<String>> {
    let f = LinearForms::of(sys)?;
    let d = sys.dof();
    let labels = &sys.basis().labels;
    let second: Vec<String> = labels.iter().map(|l| format!("{}''", l)).collect();
    let qdd: Vec<String> = (1..=d).map(|i| format!("qdd{}", i)).collect();
    let q: Vec<String> = (1..=d).map(|i| format!("q{}", i)).collect();
    let drive = f.g_time.add(&f.v_time);
    let mut out = Vec::new();
    for j in 0..d {
        let mut coeffs: Vec<Rational> = f.mass.row(j).to_vec();
        let mut names = qdd.clone();
        coeffs.extend(f.stiffness.row(j).iter().cloned());
        names.extend(q.iter().cloned());
        coeffs.push(f.constant[j].clone());
        names.push(String::new());
        coeffs.extend(drive.row(j).iter().cloned());
        names.extend(labels.iter().cloned());
        coeffs.extend(f.w_time.row(j).iter().cloned());
        names.extend(second.iter().cloned());
        out.push(format!(
            "Q{} = {}",
            j + 1,
            linear_combination(&coeffs, &names)
        ));
    }
    Some(out)
}
