use advecta::harness::{
    analytic_solution, determinism_check, initial_field, run_case, CaseId, CaseSpec, MeshKind, RunConfig, RunStatus,
    SchemeId,
};
use advecta::Vec2;

fn cfg(case: CaseId, scheme: SchemeId, mesh: MeshKind, nx: usize, dt: f64) -> RunConfig {
    RunConfig::new(case, scheme, mesh, nx, dt)
}

#[test]
fn solid_body_split_runs_at_unit_courant_number() {
    let r = run_case(&cfg(CaseId::SolidBody, SchemeId::Split, MeshKind::Orthogonal, 100, 1.0)).unwrap();
    assert_eq!(r.status, RunStatus::Completed);
    assert_eq!(r.steps, 600);
    assert!((r.courant.max_c - 1.0).abs() < 0.1, "max c {}", r.courant.max_c);
    assert_eq!(r.error_time, Some(500.0));
    assert!((r.final_mass - r.initial_mass).abs() < 1e-10 * r.initial_mass);
}

#[test]
fn orography_split_is_unstable_at_large_courant_number() {
    let r = run_case(&cfg(CaseId::Orography, SchemeId::Split, MeshKind::Distorted, 300, 1000.0)).unwrap();
    assert!(matches!(r.status, RunStatus::Diverged { .. }));
    assert!(r.courant.max_cd > 1.0);
    assert!(r.norms.is_none() && r.error_field.is_none());
}

#[test]
fn orography_implicit_stays_bounded_at_large_courant_number() {
    let r = run_case(&cfg(CaseId::Orography, SchemeId::MolImplicit, MeshKind::Distorted, 300, 1000.0)).unwrap();
    assert_eq!(r.status, RunStatus::Completed);
    assert!(r.max_abs <= 1.2);
    // Four outer iterations above unit Courant number.
    assert_eq!(r.outer_mean, 4.0);
}

#[test]
fn rk2_close_to_implicit_at_half_courant_number() {
    let rk2 = run_case(&cfg(CaseId::SolidBody, SchemeId::MolRk2, MeshKind::Orthogonal, 100, 0.5)).unwrap();
    let cn = run_case(&cfg(CaseId::SolidBody, SchemeId::MolImplicit, MeshKind::Orthogonal, 100, 0.5)).unwrap();
    let (a, b) = (rk2.l2().unwrap(), cn.l2().unwrap());
    assert!((a - b).abs() <= 0.1 * b, "rk2 {a:.4e} vs implicit {b:.4e}");
}

#[test]
fn implicit_is_stable_at_ten_times_the_courant_limit() {
    let long = run_case(&cfg(CaseId::SolidBody, SchemeId::MolImplicit, MeshKind::Orthogonal, 100, 10.0)).unwrap();
    let short = run_case(&cfg(CaseId::SolidBody, SchemeId::MolImplicit, MeshKind::Orthogonal, 100, 1.0)).unwrap();
    assert_eq!(long.status, RunStatus::Completed);
    assert!(long.courant.max_c > 9.0);
    assert!(long.max_abs <= 1.0 + 1e-9);
    assert!(long.l2().unwrap() > short.l2().unwrap());
}

#[test]
fn deformational_reference_is_the_initial_field() {
    let spec = CaseSpec::new(CaseId::Deform, MeshKind::Distorted, SchemeId::Split, 60, 30, 5.0, None).unwrap();
    let mesh = spec.build_mesh().unwrap();
    assert_eq!(analytic_solution(&spec, &mesh, 5.0).unwrap(), initial_field(&spec, &mesh));
    let r = run_case(&cfg(CaseId::Deform, SchemeId::Split, MeshKind::Distorted, 60, 0.05)).unwrap();
    assert!(r.l2().unwrap() > 0.0 && r.l2().unwrap() < 1.0);
}

#[test]
fn orography_reference_is_sheared_downstream() {
    let spec = CaseSpec::new(CaseId::Orography, MeshKind::Distorted, SchemeId::Split, 300, 50, 10_000.0, None).unwrap();
    // 100 km downstream above the shear layer; the bell centre rests at z0.
    assert!((spec.exact_value(Vec2::new(50_000.0, 9000.0), 10_000.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn determinism_check_agrees() {
    let (r, same) = determinism_check(&cfg(CaseId::Deform, SchemeId::MolImplicit, MeshKind::Distorted, 24, 0.1).with_t_end(1.0)).unwrap();
    assert!(same);
    assert_eq!(r.steps, 10);
}

#[test]
fn mountain_height_is_configurable() {
    let low = cfg(CaseId::Orography, SchemeId::Split, MeshKind::Distorted, 60, 500.0).with_ny(10).with_t_end(1000.0);
    let high = low.clone().with_h0(6000.0);
    let a = run_case(&low).unwrap();
    let b = run_case(&high).unwrap();
    assert!(b.courant.max_c > a.courant.max_c);
}
