use std::collections::BTreeSet;

use thiserror::Error;

use super::Primitive::{self, *};

/// The 25 method families and their primitive decompositions.
pub const FAMILIES: [(&str, &[Primitive]); 25] = [
    ("Finite Difference (FD)", &[Differentiate, SolveLinear, Evolve, Constrain, Discretize]),
    ("Finite Element (FEM)", &[Differentiate, Integrate, SolveLinear, Constrain, Discretize]),
    ("Finite Volume (FVM)", &[Integrate, SolveLinear, Evolve, Constrain, Discretize]),
    ("Spectral methods", &[Transform, SolveLinear, Evolve, Constrain]),
    ("Discontinuous Galerkin (DG)", &[Differentiate, Integrate, SolveLinear, Evolve, Constrain, Discretize]),
    ("Boundary Element (BEM)", &[Integrate, SolveLinear, Constrain, Discretize]),
    ("Smoothed Particle (SPH)", &[Differentiate, Evaluate, Evolve, Couple, Discretize]),
    ("Lattice Boltzmann (LBM)", &[Evolve, Couple, Constrain, Discretize]),
    ("Density Functional Theory (DFT)", &[Differentiate, SolveLinear, Evaluate, Project, Constrain, Discretize, Optimize]),
    ("Molecular Dynamics (MD)", &[Evaluate, Evolve, Sample, Couple, Constrain]),
    ("Full Waveform Inversion (FWI)", &[Differentiate, SolveLinear, Evolve, Transform, Optimize, Constrain, Discretize]),
    ("Tensor Networks (DMRG)", &[SolveLinear, Project, Optimize, Constrain]),
    ("Monte Carlo (MC/MCMC)", &[Evaluate, Sample, Constrain]),
    ("Configuration Interaction (CI)", &[Differentiate, SolveLinear, Project, Constrain, Discretize]),
    ("Adaptive Mesh Refinement (AMR)", &[Differentiate, SolveLinear, Evolve, Constrain, Discretize]),
    ("Isogeometric Analysis (IGA)", &[Differentiate, Integrate, SolveLinear, Constrain, Discretize]),
    ("Radial Basis Functions (RBF)", &[Evaluate, SolveLinear, Constrain]),
    ("Peridynamics", &[Integrate, Evaluate, Evolve, Couple, Constrain, Discretize]),
    ("Domain Decomposition (DDM)", &[SolveLinear, Couple, Constrain, Discretize]),
    ("Fluid–Structure Interaction (FSI)", &[Differentiate, SolveLinear, Evolve, Evaluate, Couple, Constrain, Discretize]),
    ("Computed Tomography (CT recon)", &[Integrate, SolveLinear, Optimize, Constrain, Discretize]),
    ("Bayesian Inference (MCMC)", &[Evaluate, Sample, Optimize, Constrain]),
    ("Optimal Control", &[Differentiate, SolveLinear, Evolve, Optimize, Constrain, Discretize]),
    ("Compressed Sensing", &[Transform, Project, Optimize, Constrain]),
    ("Particle-in-Cell (PIC)", &[Differentiate, Evaluate, Evolve, Sample, Couple, Discretize]),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("unknown method family `{0}`")]
    UnknownFamily(String),
    #[error("abbreviation `{name}` is ambiguous: {}", .candidates.join(", "))]
    Ambiguous { name: String, candidates: Vec<String> },
}

/// Lowercases and folds hyphen and dash variants to a single `-`.
fn normalize(s: &str) -> String {
    s.trim()
        .to_lowercase()
        .replace("--", "-")
        .replace(['–', '—'], "-")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn abbreviations(name: &str) -> Vec<String> {
    let Some(inner) = name.split_once('(').and_then(|(_, r)| r.strip_suffix(')')) else {
        return Vec::new();
    };
    let mut out: Vec<String> = inner.split('/').map(normalize).collect();
    out.push(normalize(inner));
    out
}

/// Primitive set of a method family, looked up by full name (case and dash
/// style insensitive) or by a parenthesised abbreviation such as `FEM` when
/// that abbreviation names exactly one family.
pub fn primitives_for_family(family: &str) -> Result<BTreeSet<Primitive>, FamilyError> {
    let key = normalize(family);
    if let Some((_, prims)) = FAMILIES.iter().find(|(n, _)| normalize(n) == key) {
        return Ok(prims.iter().copied().collect());
    }
    let hits: Vec<_> = FAMILIES
        .iter()
        .filter(|(n, _)| abbreviations(n).contains(&key))
        .collect();
    match hits.as_slice() {
        [(_, prims)] => Ok(prims.iter().copied().collect()),
        [] => Err(FamilyError::UnknownFamily(family.to_string())),
        many => Err(FamilyError::Ambiguous {
            name: family.to_string(),
            candidates: many.iter().map(|(n, _)| n.to_string()).collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(symbols: &str) -> BTreeSet<Primitive> {
        symbols
            .split_whitespace()
            .map(|s| s.parse::<Primitive>().unwrap())
            .collect()
    }

    #[test]
    fn named_examples() {
        assert_eq!(primitives_for_family("Finite Difference (FD)").unwrap(), set("∂ L E B G"));
        assert_eq!(primitives_for_family("Spectral methods").unwrap(), set("F L E B"));
        assert_eq!(primitives_for_family("Computed Tomography (CT recon)").unwrap(), set("∫ L O B G"));
    }

    #[test]
    fn lookup_variants() {
        assert_eq!(primitives_for_family("fem").unwrap(), set("∂ ∫ L B G"));
        assert_eq!(primitives_for_family("Fluid--Structure Interaction (FSI)").unwrap(), set("∂ L E N K B G"));
        assert_eq!(primitives_for_family("fluid-structure interaction (fsi)").unwrap(), set("∂ L E N K B G"));
        assert_eq!(primitives_for_family("MC").unwrap(), set("N S B"));
        assert!(matches!(primitives_for_family("MCMC"), Err(FamilyError::Ambiguous { .. })));
        assert!(matches!(primitives_for_family("Ray tracing"), Err(FamilyError::UnknownFamily(_))));
    }

    #[test]
    fn table_is_well_formed() {
        let names: BTreeSet<_> = FAMILIES.iter().map(|(n, _)| normalize(n)).collect();
        assert_eq!(names.len(), 25);
        for (_, prims) in FAMILIES {
            let unique: BTreeSet<_> = prims.iter().collect();
            assert_eq!(unique.len(), prims.len());
        }
    }
}
