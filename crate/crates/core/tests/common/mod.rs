#![allow(dead_code)]

use nalgebra::DVector;
use netgrad::coupling::{Domain, OddFn, SeparableFn};
use netgrad::{CouplingFunction, EnergyFunction, GradientSystem, WeightedDigraph};
use rand::seq::SliceRandom;
use rand::Rng;

/// Couplings that satisfy the sign and monotonicity axioms on their domains.
pub fn couplings() -> Vec<CouplingFunction> {
    vec![
        CouplingFunction::Linear,
        CouplingFunction::Odd(OddFn::Tanh),
        CouplingFunction::Odd(OddFn::Atan),
        CouplingFunction::Odd(OddFn::Cubic),
        CouplingFunction::gain(3.0).unwrap(),
        CouplingFunction::Separable(SeparableFn::Identity),
        CouplingFunction::Separable(SeparableFn::Ln),
        CouplingFunction::Separable(SeparableFn::Exp),
        CouplingFunction::power(2.0).unwrap(),
        CouplingFunction::Sinusoidal,
    ]
}

/// Strictly convex energy densities.
pub fn energies() -> Vec<EnergyFunction> {
    vec![
        EnergyFunction::Quadratic,
        EnergyFunction::RelativeEntropy,
        EnergyFunction::power_law(3.0).unwrap(),
        EnergyFunction::power_law(1.5).unwrap(),
    ]
}

/// Random strongly connected graph satisfying detailed balance: a random
/// spanning tree plus extra edges, symmetric conductances `a_ij` and
/// capacitances `c_i`, `w_ij = a_ij / c_i`. Returns the graph and the
/// unnormalized `c`.
pub fn random_balanced_graph<R: Rng>(rng: &mut R, n: usize) -> (WeightedDigraph, Vec<f64>) {
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for k in 1..n {
        let (i, j) = (order[k], order[rng.gen_range(0..k)]);
        seen.insert((i.min(j), i.max(j)));
        pairs.push((i, j));
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j && seen.insert((i.min(j), i.max(j))) {
            pairs.push((i, j));
        }
    }
    let bidirected: Vec<_> = pairs
        .into_iter()
        .map(|(i, j)| {
            let a = rng.gen_range(0.1..2.0);
            (i, j, a / c[i], a / c[j])
        })
        .collect();
    (WeightedDigraph::from_bidirected(n, &bidirected).unwrap(), c)
}

/// Sampling interval for states: the intersection of the coupling and energy
/// domains, kept away from boundaries, and narrowed below `pi` for the
/// sinusoidal coupling.
pub fn state_window(sys: &GradientSystem) -> (f64, f64) {
    let (lo, hi) = match sys.state_domain() {
        Domain::Real => (-1.5, 1.5),
        _ => (0.2, 3.0),
    };
    if matches!(sys.coupling(), CouplingFunction::Sinusoidal) {
        (lo, lo + 2.5)
    } else {
        (lo, hi)
    }
}

pub fn random_state<R: Rng>(rng: &mut R, sys: &GradientSystem) -> DVector<f64> {
    let (lo, hi) = state_window(sys);
    DVector::from_fn(sys.node_count(), |_, _| rng.gen_range(lo..hi))
}

/// A random system drawn from the catalog; retries combinations whose
/// domains do not overlap.
pub fn random_system<R: Rng>(rng: &mut R, max_nodes: usize) -> GradientSystem {
    let n = rng.gen_range(2..=max_nodes);
    let (g, _) = random_balanced_graph(rng, n);
    let coupling = *couplings().choose(rng).unwrap();
    let energy = energies().choose(rng).unwrap().clone();
    GradientSystem::new(g, coupling, energy).unwrap()
}

pub fn two_node(coupling: CouplingFunction, energy: EnergyFunction) -> GradientSystem {
    let g = WeightedDigraph::from_bidirected(2, &[(0, 1, 2.0, 1.0)]).unwrap();
    GradientSystem::new(g, coupling, energy).unwrap()
}

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}
