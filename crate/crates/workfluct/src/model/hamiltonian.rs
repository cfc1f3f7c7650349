use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::drive::{DrivePair, Splittings};
use super::generator::{AncillaBlock, BlockHamiltonian, Coef, TdHamiltonian};
use super::params::{BathMode, ModelParams};
use super::schedule::{Form, Schedule};
use crate::error::{Error, Result};
use crate::qop::{embed, fock_ops, number, position, quadrature_sq, sigma_x, sigma_z, Operator, SpaceLayout};

/// Layout of one qubit and the oscillator, `[2, N]`.
pub fn qubit_oscillator_layout(params: &ModelParams) -> Result<SpaceLayout> {
    SpaceLayout::new(vec![2, params.n_fock])
}

/// Layout of two qubits and the oscillator, `[2, 2, N]`.
pub fn two_qubit_layout(params: &ModelParams) -> Result<SpaceLayout> {
    SpaceLayout::new(vec![2, 2, params.n_fock])
}

/// `ω(a†a + ½)`
pub fn h_free(params: &ModelParams) -> Result<Operator> {
    let n = number(params.n_fock)?;
    let id = Operator::identity(n.layout());
    Ok(&n.scale(params.omega) + &id.scale(0.5 * params.omega))
}

/// `ω(a†a + ½) − λ(a + a†)²`
pub fn h_system(params: &ModelParams, lambda: f64) -> Result<Operator> {
    let limit = params.stability_limit();
    if !(lambda < limit) {
        return Err(Error::UnstableDrive { lambda, limit });
    }
    Ok(&h_free(params)? - &quadrature_sq(params.n_fock)?.scale(lambda))
}

/// The driven oscillator `H_S(λ_t)` as a generator.
pub fn system_generator(params: &ModelParams, lambda: &Schedule) -> Result<TdHamiltonian> {
    check_stable(params, lambda)?;
    TdHamiltonian::new(&SpaceLayout::single(params.n_fock)?)
        .with_term(h_free(params)?, Coef::Const(1.0))?
        .with_term(quadrature_sq(params.n_fock)?, Coef::scheduled(-1.0, lambda))
}

fn check_stable(params: &ModelParams, lambda: &Schedule) -> Result<()> {
    let max = lambda.max_on(4);
    if !(max < params.stability_limit()) {
        return Err(Error::UnstableDrive { lambda: max, limit: params.stability_limit() });
    }
    Ok(())
}

/// Ideal ancilla coupling `ε/2 σz + H₀ − (χ⁺Π₊ + χ⁻Π₋) Q` as an ancilla-block generator.
pub fn ideal_generator(params: &ModelParams, drive: &DrivePair, eps: f64) -> Result<BlockHamiltonian> {
    check_stable(params, &drive.chi_plus)?;
    check_stable(params, &drive.chi_minus)?;
    let sys = SpaceLayout::single(params.n_fock)?;
    let h0 = h_free(params)?;
    let q = quadrature_sq(params.n_fock)?;
    let block = |sign: f64, chi: &Schedule| -> Result<AncillaBlock> {
        Ok(AncillaBlock {
            scalar: vec![Coef::Const(0.5 * sign * eps)],
            system: TdHamiltonian::new(&sys)
                .with_term(h0.clone(), Coef::Const(1.0))?
                .with_term(q.clone(), Coef::scheduled(-1.0, chi))?,
        })
    };
    BlockHamiltonian::new(SpaceLayout::single(2)?, vec![block(1.0, &drive.chi_plus)?, block(-1.0, &drive.chi_minus)?])
}

/// Dense ideal Hamiltonian at time `t` on `[2, N]`.
pub fn h_ancilla_ideal(params: &ModelParams, drive: &DrivePair, eps: f64, t: f64) -> Result<Operator> {
    let total = drive.total_time();
    if !(t >= 0.0 && t <= total) {
        return Err(Error::OutOfDomain { t, end: total });
    }
    ideal_generator(params, drive, eps)?.at(t)
}

/// Single-qubit Rabi Hamiltonian `ε/2 σz + ω(a†a+½) + g(a+a†)σx`.
pub fn h_rabi(eps: f64, params: &ModelParams) -> Result<Operator> {
    Ok(rabi_generator(&Schedule::constant(eps, 1.0)?, params)?.at(0.0))
}

pub fn rabi_generator(eps: &Schedule, params: &ModelParams) -> Result<TdHamiltonian> {
    let l = qubit_oscillator_layout(params)?;
    let x = position(params.n_fock)?;
    TdHamiltonian::new(&l)
        .with_term(embed(&sigma_z(), 0, &l)?, Coef::scheduled(0.5, eps))?
        .with_term(embed(&h_free(params)?, 1, &l)?, Coef::Const(1.0))?
        .with_term(&embed(&sigma_x(), 0, &l)? * &embed(&x, 1, &l)?, Coef::Const(params.g))
}

/// Soft-mode Hamiltonian `ε/2 σz + ω(a†a+½) + (g²/ε) Q σz`.
pub fn h_softmode(eps: f64, params: &ModelParams) -> Result<Operator> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    softmode_generator(&Schedule::constant(eps, 1.0)?, params)?.at(0.0)
}

pub fn softmode_generator(eps: &Schedule, params: &ModelParams) -> Result<BlockHamiltonian> {
    if eps.min_on(8) <= 0.0 {
        return Err(Error::InvalidParameter("soft-mode splitting must stay positive".into()));
    }
    let g2 = params.g * params.g;
    let coupling = eps.map_forms(|f| Form::Reciprocal { numerator: g2, base: Box::new(f.clone()) });
    let sys = SpaceLayout::single(params.n_fock)?;
    let h0 = h_free(params)?;
    let q = quadrature_sq(params.n_fock)?;
    let block = |sign: f64| -> Result<AncillaBlock> {
        Ok(AncillaBlock {
            scalar: vec![Coef::scheduled(0.5 * sign, eps)],
            system: TdHamiltonian::new(&sys)
                .with_term(h0.clone(), Coef::Const(1.0))?
                .with_term(q.clone(), Coef::scheduled(sign, &coupling))?,
        })
    };
    BlockHamiltonian::new(SpaceLayout::single(2)?, vec![block(1.0)?, block(-1.0)?])
}

/// Two-qubit Rabi Hamiltonian on `[2, 2, N]`.
pub fn h_two_rabi(eps1: f64, eps2: f64, params: &ModelParams) -> Result<Operator> {
    let e1 = Schedule::constant(eps1, 1.0)?;
    let e2 = Schedule::constant(eps2, 1.0)?;
    Ok(two_rabi_terms(&e1, &e2, params)?.at(0.0))
}

fn two_rabi_terms(eps1: &Schedule, eps2: &Schedule, params: &ModelParams) -> Result<TdHamiltonian> {
    let l = two_qubit_layout(params)?;
    let x = embed(&position(params.n_fock)?, 2, &l)?;
    TdHamiltonian::new(&l)
        .with_term(embed(&sigma_z(), 0, &l)?, Coef::scheduled(0.5, eps1))?
        .with_term(embed(&sigma_z(), 1, &l)?, Coef::scheduled(0.5, eps2))?
        .with_term(embed(&h_free(params)?, 2, &l)?, Coef::Const(1.0))?
        .with_term(&x * &embed(&sigma_x(), 0, &l)?, Coef::Const(params.g1))?
        .with_term(&x * &embed(&sigma_x(), 1, &l)?, Coef::Const(params.g2))
}

pub fn two_rabi_generator(split: &Splittings, params: &ModelParams) -> Result<TdHamiltonian> {
    two_rabi_terms(&split.eps1, &split.eps2, params)
}

/// Diagonal (soft-mode) two-qubit Hamiltonian on `[2, 2, N]`.
pub fn h_two_diag(eps1: f64, eps2: f64, params: &ModelParams) -> Result<Operator> {
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::InvalidParameter(format!("splittings ({eps1}, {eps2}) must be positive")));
    }
    let l = two_qubit_layout(params)?;
    let q = embed(&quadrature_sq(params.n_fock)?, 2, &l)?;
    let z1 = embed(&sigma_z(), 0, &l)?;
    let z2 = embed(&sigma_z(), 1, &l)?;
    let mut h = embed(&h_free(params)?, 2, &l)?;
    h.add_scaled(0.5 * eps1, &z1)?;
    h.add_scaled(0.5 * eps2, &z2)?;
    h = &h + &(&q * &(&z1.scale(params.g1 * params.g1 / eps1) + &z2.scale(params.g2 * params.g2 / eps2)));
    Ok(h)
}

/// Diagonal two-qubit generator in projector form; blocks ordered `++, +−, −+, −−`.
pub fn two_diag_generator(split: &Splittings, params: &ModelParams) -> Result<BlockHamiltonian> {
    let sys = SpaceLayout::single(params.n_fock)?;
    let h0 = h_free(params)?;
    let q = quadrature_sq(params.n_fock)?;
    let mut blocks = Vec::with_capacity(4);
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let chi = if s1 == s2 { &split.chi_plus_eff } else { &split.chi_minus_eff };
            blocks.push(AncillaBlock {
                scalar: vec![Coef::scheduled(0.5 * s1, &split.eps1), Coef::scheduled(0.5 * s2, &split.eps2)],
                system: TdHamiltonian::new(&sys)
                    .with_term(h0.clone(), Coef::Const(1.0))?
                    .with_term(q.clone(), Coef::scheduled(s1, chi))?,
            });
        }
    }
    BlockHamiltonian::new(SpaceLayout::new(vec![2, 2])?, blocks)
}

/// System plus explicit bath oscillators with bilinear coupling.
#[derive(Clone, Debug)]
pub struct OpenSystem {
    layout: SpaceLayout,
    /// `H₀ ⊗ 1 + H_B + H_SB`, the drive-independent part.
    static_part: Operator,
    /// `Q ⊗ 1`
    q: Operator,
    n_fock: usize,
    bath_dims: Vec<usize>,
}

/// Maximum total S+B dimension accepted by [`h_open`].
pub const OPEN_DIM_BUDGET: usize = 1024;

/// `H_S(λ) + Σ ω_k(b†b+½) + Σ c_k (a+a†)(b_k+b_k†)`
pub fn h_open(params: &ModelParams, bath: &[BathMode]) -> Result<OpenSystem> {
    if bath.is_empty() || bath.len() > 2 {
        return Err(Error::InvalidParameter(format!("open system needs 1 or 2 bath modes, got {}", bath.len())));
    }
    let nb = params.n_bath;
    let mut factors = vec![params.n_fock];
    factors.extend(std::iter::repeat(nb).take(bath.len()));
    let layout = SpaceLayout::new(factors)?;
    if layout.total_dim() > OPEN_DIM_BUDGET {
        return Err(Error::InvalidParameter(format!(
            "system+bath dimension {} exceeds the budget {OPEN_DIM_BUDGET}",
            layout.total_dim()
        )));
    }
    let mut static_part = embed(&h_free(params)?, 0, &layout)?;
    let xs = embed(&position(params.n_fock)?, 0, &layout)?;
    let (b, bd) = fock_ops(nb)?;
    let nb_op = &bd * &b;
    let xb = &b + &bd;
    for (k, mode) in bath.iter().enumerate() {
        let hb = &nb_op.scale(mode.freq) + &Operator::identity(nb_op.layout()).scale(0.5 * mode.freq);
        static_part = &static_part + &embed(&hb, k + 1, &layout)?;
        if mode.coupling != 0.0 {
            static_part = &static_part + &(&xs * &embed(&xb, k + 1, &layout)?).scale(mode.coupling);
        }
    }
    let q = embed(&quadrature_sq(params.n_fock)?, 0, &layout)?;
    Ok(OpenSystem { layout, static_part, q, n_fock: params.n_fock, bath_dims: vec![nb; bath.len()] })
}

impl OpenSystem {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn bath_dims(&self) -> &[usize] {
        &self.bath_dims
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    /// `H_{S+B}(λ)`
    pub fn at(&self, lambda: f64) -> Operator {
        let mut h = self.static_part.clone();
        h.add_scaled(-lambda, &self.q).expect("same layout");
        h
    }

    pub fn generator(&self, lambda: &Schedule) -> Result<TdHamiltonian> {
        TdHamiltonian::new(&self.layout)
            .with_term(self.static_part.clone(), Coef::Const(1.0))?
            .with_term(self.q.clone(), Coef::scheduled(-1.0, lambda))
    }

    /// Ancilla coupled to the system quadrature only; blocks `+, −`.
    pub fn ancilla_generator(&self, drive: &DrivePair, eps: f64) -> Result<BlockHamiltonian> {
        let block = |sign: f64, chi: &Schedule| -> Result<AncillaBlock> {
            Ok(AncillaBlock { scalar: vec![Coef::Const(0.5 * sign * eps)], system: self.generator(chi)? })
        };
        BlockHamiltonian::new(
            SpaceLayout::single(2)?,
            vec![block(1.0, &drive.chi_plus)?, block(-1.0, &drive.chi_minus)?],
        )
    }
}

/// `|i><j|` on a `d`-dimensional factor.
pub fn ket_bra(d: usize, i: usize, j: usize) -> Result<Operator> {
    let mut m = Array2::zeros((d, d));
    m[[i, j]] = C64::new(1.0, 0.0);
    Operator::from_matrix(m)
}
