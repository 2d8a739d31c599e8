use isac_conic::{
    embed_complex, extract_hermitian, kkt_residuals, solve, Affine, Block, BlockValue, ConicProgram, ConicSolution,
    KktResiduals, Status, SymCoef, ToleranceSet, C64,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> ToleranceSet {
    ToleranceSet::default()
}

fn assert_certified(p: &ConicProgram, sol: &ConicSolution) {
    assert_eq!(sol.status, Status::Optimal);
    let r = kkt_residuals(p, sol);
    assert!(r.within(1e-7), "residuals {r:?}");
    assert!(sol.primal_objective >= sol.dual_objective - 1e-8, "weak duality {} {}", sol.primal_objective, sol.dual_objective);
}

fn lp_x_ge_one() -> ConicProgram {
    let mut p = ConicProgram::new();
    let x = p.add_block(Block::Free(1));
    p.objective = Affine::constant(0.0).add_entry(x, 0, 1.0);
    p.ineqs.push(Affine::constant(-1.0).add_entry(x, 0, 1.0));
    p
}

#[test]
fn lp_lower_bound() {
    let p = lp_x_ge_one();
    let sol = solve(&p, &tol()).unwrap();
    assert_certified(&p, &sol);
    assert!((sol.x[0].vec()[0] - 1.0).abs() < 1e-6);
}

fn exact_lp_solution() -> ConicSolution {
    ConicSolution {
        status: Status::Optimal,
        x: vec![BlockValue::Vec(DVector::from_element(1, 1.0))],
        ineq_slack: DVector::from_element(1, 0.0),
        soc_slack: vec![],
        log_args: DVector::zeros(0),
        z: vec![BlockValue::Vec(DVector::zeros(1))],
        eq_dual: DVector::zeros(0),
        ineq_dual: DVector::from_element(1, 1.0),
        soc_dual: vec![],
        log_dual: DVector::zeros(0),
        primal_objective: 1.0,
        dual_objective: 1.0,
        residuals: KktResiduals::default(),
        iterations: 0,
        newton_steps: 0,
        certificate: None,
    }
}

#[test]
fn residuals_of_exact_lp_optimum_vanish() {
    let p = lp_x_ge_one();
    let r = kkt_residuals(&p, &exact_lp_solution());
    assert!(r.primal <= 1e-12 && r.dual <= 1e-12 && r.gap <= 1e-12, "{r:?}");
}

#[test]
fn perturbed_primal_shows_in_residual() {
    let p = lp_x_ge_one();
    let mut sol = exact_lp_solution();
    sol.x[0] = BlockValue::Vec(DVector::from_element(1, 1.1));
    let r = kkt_residuals(&p, &sol);
    assert!(r.primal >= 0.1 - 1e-12, "{r:?}");
}

#[test]
fn trace_minimization_matches_inverse_lambda_max() {
    let mut p = ConicProgram::new();
    let x = p.add_block(Block::Psd { dim: 2, complex: false });
    p.objective = Affine::constant(0.0).add_sym(x, SymCoef::Identity(1.0));
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    p.eqs.push(Affine::constant(-1.0).add_sym(x, SymCoef::Dense(a)));
    let sol = solve(&p, &tol()).unwrap();
    assert_certified(&p, &sol);
    assert!((sol.primal_objective - 0.5).abs() < 1e-6, "{}", sol.primal_objective);
}

#[test]
fn hyperbolic_constraint() {
    // minimize t  s.t. ‖(2, t − φ)‖ ≤ t + φ, φ = 1
    let mut p = ConicProgram::new();
    let v = p.add_block(Block::Free(2));
    p.objective = Affine::constant(0.0).add_entry(v, 0, 1.0);
    p.eqs.push(Affine::constant(-1.0).add_entry(v, 1, 1.0));
    p.socs.push(vec![
        Affine::constant(0.0).add_entry(v, 0, 1.0).add_entry(v, 1, 1.0),
        Affine::constant(2.0),
        Affine::constant(0.0).add_entry(v, 0, 1.0).add_entry(v, 1, -1.0),
    ]);
    let sol = solve(&p, &tol()).unwrap();
    assert_certified(&p, &sol);
    assert!((sol.x[0].vec()[0] - 1.0).abs() < 1e-6);
}

#[test]
fn log_objective_matches_closed_form() {
    // maximize ln(1 + 3x) + ln(2 − x), 0 ≤ x ≤ 2  →  x = 5/6
    let mut p = ConicProgram::new();
    let x = p.add_block(Block::Nonneg(1));
    p.logs.push(isac_conic::LogTerm { weight: 1.0, arg: Affine::constant(1.0).add_entry(x, 0, 3.0) });
    p.logs.push(isac_conic::LogTerm { weight: 1.0, arg: Affine::constant(2.0).add_entry(x, 0, -1.0) });
    p.ineqs.push(Affine::constant(2.0).add_entry(x, 0, -1.0));
    let sol = solve(&p, &tol()).unwrap();
    assert_certified(&p, &sol);
    assert!((sol.x[0].vec()[0] - 5.0 / 6.0).abs() < 1e-6, "{:?}", sol.x);
}

#[test]
fn infeasible_program_is_certified() {
    // x ≥ 0, x ≤ −1
    let mut p = ConicProgram::new();
    let x = p.add_block(Block::Nonneg(1));
    p.objective = Affine::constant(0.0).add_entry(x, 0, 1.0);
    p.ineqs.push(Affine::constant(-1.0).add_entry(x, 0, -1.0));
    let sol = solve(&p, &tol()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
    assert!(sol.certificate.unwrap() > 10.0 * tol().feas);
}

#[test]
fn solve_is_deterministic() {
    let p = random_sdp(&mut ChaCha8Rng::seed_from_u64(3), 3);
    let a = solve(&p, &tol()).unwrap();
    let b = solve(&p, &tol()).unwrap();
    assert_eq!(a, b);
}

fn random_sym(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

/// min ⟨C, X⟩  s.t.  ⟨A, X⟩ = b, tr X = 1, X ⪰ 0.
fn random_sdp(rng: &mut impl Rng, n: usize) -> ConicProgram {
    let c = random_sym(rng, n);
    let a = random_sym(rng, n);
    // b taken from a random density matrix keeps the program strictly feasible
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let x0 = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
    let x0 = &x0 / x0.trace();
    let b = a.dot(&x0);
    let mut p = ConicProgram::new();
    let x = p.add_block(Block::Psd { dim: n, complex: false });
    p.objective = Affine::constant(0.0).add_sym(x, SymCoef::Dense(c));
    p.eqs.push(Affine::constant(-b).add_sym(x, SymCoef::Dense(a)));
    p.eqs.push(Affine::constant(-1.0).add_sym(x, SymCoef::Identity(1.0)));
    p
}

/// Dual of the random SDP: `max_y  y·b + λ_min(C − y A)`, concave in one variable.
fn dual_oracle(p: &ConicProgram) -> f64 {
    let (c, a, b) = match (&p.objective.terms[0].1, &p.eqs[0].terms[0].1) {
        (isac_conic::Coef::Sym(SymCoef::Dense(c)), isac_conic::Coef::Sym(SymCoef::Dense(a))) => {
            (c.clone(), a.clone(), -p.eqs[0].constant)
        }
        _ => unreachable!(),
    };
    let f = |y: f64| y * b + SymmetricEigen::new(&c - &a * y).eigenvalues.min();
    // golden-section search on a bracket wide enough for |entries| ≤ 1
    let (mut lo, mut hi) = (-1e3, 1e3);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    f(0.5 * (lo + hi))
}

#[test]
fn random_tiny_sdps_match_dual_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 3, 4] {
        for _ in 0..5 {
            let p = random_sdp(&mut rng, n);
            let sol = solve(&p, &tol()).unwrap();
            assert_certified(&p, &sol);
            let oracle = dual_oracle(&p);
            let rel = (sol.primal_objective - oracle).abs() / oracle.abs().max(1.0);
            assert!(rel < 1e-5, "n={n} solver {} oracle {}", sol.primal_objective, oracle);
        }
    }
}

#[test]
fn complex_block_solution_round_trips() {
    // min Re tr(C W) over Hermitian W ⪰ 0 with tr W = 1: optimum is λ_min(C).
    let c = DMatrix::from_row_slice(
        2,
        2,
        &[C64::new(1.0, 0.0), C64::new(0.3, -0.8), C64::new(0.3, 0.8), C64::new(-0.5, 0.0)],
    );
    let ce = embed_complex(&c).unwrap();
    let mut p = ConicProgram::new();
    let w = p.add_block(Block::Psd { dim: 4, complex: true });
    p.objective = Affine::constant(0.0).add_sym(w, SymCoef::Dense(ce * 0.5));
    p.eqs.push(Affine::constant(-1.0).add_sym(w, isac_conic::embed::trace_form(1.0)));
    let sol = solve(&p, &tol()).unwrap();
    assert_certified(&p, &sol);
    let lam_min = SymmetricEigen::new(c.clone()).eigenvalues.min();
    assert!((sol.primal_objective - lam_min).abs() < 1e-6);
    let block = sol.x[0].mat();
    let back = embed_complex(&extract_hermitian(block)).unwrap();
    assert!((back - block).amax() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn embedding_traces_double_and_eigenvalues_pair(entries in prop::collection::vec(-2.0f64..2.0, 9)) {
        let n = 3;
        let mut h = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        let mut k = 0;
        for i in 0..n {
            h[(i, i)] = C64::new(entries[k], 0.0);
            k += 1;
            for j in 0..i {
                let z = C64::new(entries[k], entries[(k + 4) % 9]);
                k += 1;
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        let e = embed_complex(&h).unwrap();
        prop_assert!((e.trace() - 2.0 * h.trace().re).abs() < 1e-12);
        let mut ev: Vec<f64> = SymmetricEigen::new(e.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut hv: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
        hv.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, v) in hv.iter().enumerate() {
            prop_assert!((ev[2 * i] - v).abs() < 1e-9 && (ev[2 * i + 1] - v).abs() < 1e-9);
        }
        let back = extract_hermitian(&e);
        prop_assert!((back - h).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }
}

#[test]
fn pauli_y_embedding_eigenvalues() {
    let h = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
    let e = embed_complex(&h).unwrap();
    let mut ev: Vec<f64> = SymmetricEigen::new(e).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let expect = [-1.0, -1.0, 1.0, 1.0];
    for (a, b) in ev.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }
}
