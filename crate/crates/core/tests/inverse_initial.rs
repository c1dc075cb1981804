use qheat::forward::{solve_forward_modal, SourceSpec};
use qheat::inverse_initial::{
    reconstruct, reconstruct_gamma, verify_reconstruction, InverseInitialProblem,
};
use qheat::qcore::{QLattice, QParams, ScalarFn};
use qheat::spectral::{find_eigenvalues, ModalSeries, Spectrum};

const T: f64 = 1.0;

fn setup() -> (QParams, Spectrum) {
    let ctx = QParams::default();
    (ctx, find_eigenvalues(&ctx, 6).unwrap())
}

fn source(spec: &Spectrum) -> SourceSpec {
    let phi1 = spec.basis_fn(1).unwrap();
    SourceSpec::new(
        move |_, x| phi1.call(x),
        ScalarFn::constant(0.0, T, 1.0).unwrap(),
        T,
    )
    .unwrap()
}

fn truth(spec: &Spectrum) -> ModalSeries {
    spec.series(vec![1.0, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap()
}

/// `ν = u(ξ₀, ·)` and `u(T, ·)` from the forward solver; `ξ₀ = T q^j`.
fn observe(
    gamma: &ModalSeries,
    src: &SourceSpec,
    j: usize,
    spec: &Spectrum,
    ctx: &QParams,
) -> (ModalSeries, ModalSeries) {
    let depth = QLattice::new(T, ctx).unwrap().depth();
    let bundle = solve_forward_modal(gamma, src, spec, ctx, depth).unwrap();
    (bundle.modal_u(j).clone(), bundle.modal_u(0).clone())
}

fn problem(
    src: &SourceSpec,
    alpha: f64,
    j: usize,
    nu: &ModalSeries,
    spec: &Spectrum,
    ctx: &QParams,
) -> InverseInitialProblem {
    let xi0 = T * ctx.q().powi(j as i32);
    InverseInitialProblem::new(src.clone(), alpha, xi0, spec.synthesis_fn(nu), 2).unwrap()
}

#[test]
fn round_trip_over_alpha_and_observation_time() {
    let (ctx, spec) = setup();
    let src = source(&spec);
    let star = truth(&spec);
    for j in [0, 1] {
        let (nu, u_end) = observe(&star, &src, j, &spec, &ctx);
        for alpha in [0.0, 1.0, -0.5] {
            let prob = problem(&src, alpha, j, &nu, &spec, &ctx);
            let rec = reconstruct(&prob, &spec, &ctx).unwrap();
            let err = rec.gamma().max_abs_diff(&star) / star.l2_norm();
            assert!(err <= 1e-6, "j={j} alpha={alpha}: {err:e}");

            let expected_tau = u_end.plus(&star.scaled(-alpha));
            let tau_err = rec.tau().max_abs_diff(&expected_tau);
            assert!(tau_err <= 1e-8, "tau j={j} alpha={alpha}: {tau_err:e}");

            let report = verify_reconstruction(&prob, &rec, &spec, &ctx).unwrap();
            assert!(report.nonlocal_residual <= 1e-8);
            assert!(report.observation_residual <= 1e-8);
            assert!(report.amplification_increasing());
        }
    }
}

#[test]
fn forward_from_reconstruction_matches_observation() {
    let (ctx, spec) = setup();
    let src = source(&spec);
    let (nu, _) = observe(&truth(&spec), &src, 1, &spec, &ctx);
    let prob = problem(&src, 0.5, 1, &nu, &spec, &ctx);
    let gamma = reconstruct_gamma(&prob, &spec, &ctx).unwrap();
    let (again, _) = observe(&gamma, &src, 1, &spec, &ctx);
    for k in 0..2 {
        let (a, b) = (again.coeffs()[k], nu.coeffs()[k]);
        assert!((a - b).abs() <= 1e-6 * b.abs(), "mode {k}: {a} vs {b}");
    }
}

#[test]
fn alpha_zero_tau_is_final_state() {
    let (ctx, spec) = setup();
    let src = source(&spec);
    let star = truth(&spec);
    let (nu, u_end) = observe(&star, &src, 0, &spec, &ctx);
    let prob = problem(&src, 0.0, 0, &nu, &spec, &ctx);
    let rec = reconstruct(&prob, &spec, &ctx).unwrap();
    assert!(rec.tau().max_abs_diff(&u_end) <= 1e-8);
}

#[test]
fn perturbation_is_amplified_by_a_k() {
    let (ctx, spec) = setup();
    let src = source(&spec);
    let (nu, _) = observe(&truth(&spec), &src, 1, &spec, &ctx);
    let base = reconstruct(&problem(&src, 0.0, 1, &nu, &spec, &ctx), &spec, &ctx).unwrap();
    let eps = 1e-9;
    for k in 1..=2 {
        let bumped = nu.plus(&ModalSeries::unit(spec.len(), k).scaled(eps));
        let rec = reconstruct(&problem(&src, 0.0, 1, &bumped, &spec, &ctx), &spec, &ctx).unwrap();
        let shift = rec.gamma().coeffs()[k - 1] - base.gamma().coeffs()[k - 1];
        let want = base.amplification()[k - 1] * eps;
        assert!(
            (shift - want).abs() <= 1e-4 * want,
            "mode {k}: {shift:e} vs {want:e}"
        );
    }
}

#[test]
fn map_is_linear() {
    let (ctx, spec) = setup();
    let src = source(&spec);
    let nu_a = spec.series(vec![0.3, 1e-4, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let nu_b = spec.series(vec![-0.1, 2e-5, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let zero = SourceSpec::zero(T).unwrap();
    let run = |src: &SourceSpec, nu: &ModalSeries| {
        reconstruct(&problem(src, -0.5, 0, nu, &spec, &ctx), &spec, &ctx).unwrap()
    };
    let whole = run(&src, &nu_a.plus(&nu_b));
    let parts = [run(&src, &nu_a), run(&zero, &nu_b)];
    let gamma = parts[0].gamma().plus(parts[1].gamma());
    let tau = parts[0].tau().plus(parts[1].tau());
    let scale = 1.0 + whole.gamma().l2_norm();
    assert!(whole.gamma().max_abs_diff(&gamma) <= 1e-10 * scale);
    assert!(whole.tau().max_abs_diff(&tau) <= 1e-10 * scale);
}
