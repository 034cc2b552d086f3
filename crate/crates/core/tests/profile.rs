use wavefront::heteroclinic::{compute_heteroclinic, Trajectory};
use wavefront::model::{Chemostat, LogisticDistributed, Model};
use wavefront::profile::{residual, solve_profile, verify_front, wave_params, weighted_distance, WaveProfile};
use wavefront::spectrum::{spectrum_report, SpectrumReport};
use wavefront::{Error, Tolerances};

fn fisher() -> LogisticDistributed {
    LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap()
}

fn solve(m: &dyn Model, spec: &SpectrumReport, het: &Trajectory, c: f64, tol: &Tolerances) -> wavefront::Result<WaveProfile> {
    let p = wave_params(m, c, spec, tol)?;
    solve_profile(m, het, &p, tol)
}

#[test]
fn fisher_front_decays_at_lambda_eps() {
    let tol = Tolerances::default();
    let m = fisher();
    let speeds = [4.0, 6.0, 10.0];
    let spec = spectrum_report(&m, &speeds, &tol).unwrap();
    let het = compute_heteroclinic(&m, &spec, &tol).unwrap();
    for c in speeds {
        let p = wave_params(&m, c, &spec, &tol).unwrap();
        let psi = solve_profile(&m, &het, &p, &tol).unwrap();
        let r = verify_front(&psi, &m, &p, &tol);
        assert!(r.ok, "{r:?}");
        assert!(r.positive && r.monotone_left);
        assert!(r.lambda_rel_err < 1e-3, "{r:?}");
        assert!(psi.diagnostics.converged && psi.diagnostics.tail_mismatch < 1e-3);
    }
}

#[test]
fn residual_is_second_order_in_h() {
    let m = fisher();
    let tol = Tolerances::default();
    let spec = spectrum_report(&m, &[6.0], &tol).unwrap();
    let het = compute_heteroclinic(&m, &spec, &tol).unwrap();
    let p = wave_params(&m, 6.0, &spec, &tol).unwrap();
    let coarse = solve_profile(&m, &het, &p, &Tolerances { profile_step: 0.02, ..tol.clone() }).unwrap();
    let fine = solve_profile(&m, &het, &p, &Tolerances { profile_step: 0.01, ..tol.clone() }).unwrap();
    let (rc, rf) = (residual(&coarse, &m, &p).sup, residual(&fine, &m, &p).sup);
    assert!(rc / rf >= 3.5, "{rc} {rf}");
}

#[test]
fn distance_to_heteroclinic_shrinks_with_speed() {
    let m = fisher();
    let tol = Tolerances::default();
    let speeds = [6.0, 12.0, 24.0];
    let spec = spectrum_report(&m, &speeds, &tol).unwrap();
    let het = compute_heteroclinic(&m, &spec, &tol).unwrap();
    let mut last = f64::INFINITY;
    for c in speeds {
        let psi = solve(&m, &spec, &het, c, &tol).unwrap();
        let p = wave_params(&m, c, &spec, &tol).unwrap();
        let d = weighted_distance(&psi, &het, p.mu);
        assert!(d < last, "{c}: {d} >= {last}");
        last = d;
    }
}

#[test]
fn chemostat_front_is_positive() {
    let m = Chemostat::new(1.0, 2.0, 0.2, 3.0, 1.0, 1.0, 1.0).unwrap();
    let tol = Tolerances::default();
    let spec = spectrum_report(&m, &[15.0], &tol).unwrap();
    let het = compute_heteroclinic(&m, &spec, &tol).unwrap();
    let p = wave_params(&m, 15.0, &spec, &tol).unwrap();
    let psi = solve_profile(&m, &het, &p, &tol).unwrap();
    let r = verify_front(&psi, &m, &p, &tol);
    assert!(r.ok, "{r:?}");
    for j in 0..psi.len() {
        let (s, _) = m.to_original(psi.value(j));
        assert!(s > 0.0 && s < 2.0);
    }
}

#[test]
fn slow_speed_is_rejected() {
    let m = fisher();
    let tol = Tolerances::default();
    let spec = spectrum_report(&m, &[], &tol).unwrap();
    let het = compute_heteroclinic(&m, &spec, &tol).unwrap();
    let err = solve(&m, &spec, &het, 0.5, &tol).unwrap_err();
    assert!(matches!(err, Error::StripCount { .. } | Error::NonContraction { .. }), "{err}");
}
