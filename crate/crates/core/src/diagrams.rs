//! Feynman diagrams of chi(2) processes up to second order in the coupling.
//!
//! A diagram has `V` vertices placed along the vacuum (pump) line, `P`
//! mode-labelled propagator edges with a photon-flow direction, and current
//! sources with fixed coordinate labels `x1, x2, ...`. An edge pointing from a
//! source into a vertex is an incoming photon; an edge from a vertex to a
//! source is an emitted one. Every vertex joins exactly one signal and one
//! idler endpoint, which is the energy balance `omega_p = omega_s + omega_i`.
//!
//! Evaluation follows the rules: each propagator contributes `G / i`, each
//! vertex `(i / 3!) int dz lambda(z)`, each source `i` (hbar = 1).

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::greens::{DressedPropagator, FrequencyPropagator, Grid, PropagatorMode};
use crate::nonlinear::{
    biphoton_numeric, check_energy, effective_coupling, Chi2Medium, ThreeWaveKinematics,
    ENERGY_TOLERANCE,
};
use crate::quad::{integrate_with_breakpoints, QuadOptions};

/// Highest supported vertex count.
pub const MAX_VERTICES: usize = 2;
/// Highest supported propagator count.
pub const MAX_PROPAGATORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Signal,
    Idler,
}

impl Mode {
    pub fn swapped(self) -> Self {
        match self {
            Mode::Signal => Mode::Idler,
            Mode::Idler => Mode::Signal,
        }
    }

    fn symbol(self) -> char {
        match self {
            Mode::Signal => 's',
            Mode::Idler => 'i',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Vertex(usize),
    Source(usize),
}

/// Directed propagator line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    In,
    Out,
}

/// Dangling pump line attached to a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VacuumLeg {
    pub vertex: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Spdc,
    Dfg,
    Sfg,
    CascadedSpdc,
    VacuumLoop,
    Other,
}

/// Canonical representation used for equality and ordering of diagrams.
pub type CanonicalForm = (Vec<Edge>, Vec<VacuumLeg>, Vec<(usize, usize)>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    topology: &'static str,
    swapped: bool,
    vertices: usize,
    edges: Vec<Edge>,
    sources: Vec<String>,
    vacuum_legs: Vec<VacuumLeg>,
    vacuum_links: Vec<(usize, usize)>,
    process: Process,
}

fn source_labels(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("x{k}")).collect()
}

impl Diagram {
    /// Builds and validates a diagram. Sources are labelled `x1..xn` in order.
    pub fn new(
        topology: &'static str,
        vertices: usize,
        edges: Vec<Edge>,
        n_sources: usize,
        vacuum_legs: Vec<VacuumLeg>,
        vacuum_links: Vec<(usize, usize)>,
        process: Process,
    ) -> Result<Self> {
        let d = Self {
            topology,
            swapped: false,
            vertices,
            edges,
            sources: source_labels(n_sources),
            vacuum_legs,
            vacuum_links,
            process,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn topology(&self) -> &'static str {
        self.topology
    }

    pub fn is_swapped(&self) -> bool {
        self.swapped
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn propagator_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn vacuum_legs(&self) -> &[VacuumLeg] {
        &self.vacuum_legs
    }

    pub fn vacuum_links(&self) -> &[(usize, usize)] {
        &self.vacuum_links
    }

    pub fn process(&self) -> Process {
        self.process
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::Domain(format!(
                "invalid diagram `{}`: {msg}",
                self.topology
            )))
        };
        let in_range = |e: Endpoint| match e {
            Endpoint::Vertex(v) => v < self.vertices,
            Endpoint::Source(s) => s < self.sources.len(),
        };
        let mut vertex_modes = vec![Vec::new(); self.vertices];
        let mut source_hits = vec![0usize; self.sources.len()];
        for e in &self.edges {
            if !in_range(e.from) || !in_range(e.to) {
                return bad(format!("edge {e:?} references a missing endpoint"));
            }
            if self.vertices > 0
                && matches!((e.from, e.to), (Endpoint::Source(_), Endpoint::Source(_)))
            {
                return bad("source-to-source line in an interacting diagram".into());
            }
            for end in [e.from, e.to] {
                match end {
                    Endpoint::Vertex(v) => vertex_modes[v].push(e.mode),
                    Endpoint::Source(s) => source_hits[s] += 1,
                }
            }
        }
        for (v, modes) in vertex_modes.iter_mut().enumerate() {
            modes.sort();
            if modes.as_slice() != [Mode::Signal, Mode::Idler] {
                return bad(format!(
                    "vertex {v} must join one signal and one idler line, has {modes:?}"
                ));
            }
        }
        if let Some(s) = source_hits.iter().position(|&n| n != 1) {
            return bad(format!(
                "source {} attaches to {} lines",
                self.sources[s], source_hits[s]
            ));
        }
        if self.vacuum_legs.iter().any(|l| l.vertex >= self.vertices)
            || self
                .vacuum_links
                .iter()
                .any(|&(a, b)| a >= self.vertices || b >= self.vertices || a == b)
        {
            return bad("vacuum line references a missing vertex".into());
        }
        Ok(())
    }

    /// Signal and idler exchanged on every line; source labels stay on their lines.
    /// Without vertices there is nothing to distinguish the modes, so the bare
    /// propagator maps to itself.
    pub fn swap_modes(&self) -> Self {
        if self.vertices == 0 {
            return self.clone();
        }
        let mut d = self.clone();
        for e in &mut d.edges {
            e.mode = e.mode.swapped();
        }
        d.swapped = !d.swapped;
        d
    }

    /// Lexicographically smallest description over vertex relabelings that
    /// preserve the vacuum-line links.
    pub fn canonical_form(&self) -> CanonicalForm {
        let mut links = self.vacuum_links.clone();
        links.sort();
        let mut best: Option<CanonicalForm> = None;
        for perm in permutations(self.vertices) {
            let map = |e: Endpoint| match e {
                Endpoint::Vertex(v) => Endpoint::Vertex(perm[v]),
                s => s,
            };
            let mut mapped_links: Vec<(usize, usize)> = self
                .vacuum_links
                .iter()
                .map(|&(a, b)| (perm[a], perm[b]))
                .collect();
            mapped_links.sort();
            if mapped_links != links {
                continue;
            }
            let mut edges: Vec<Edge> = self
                .edges
                .iter()
                .map(|e| Edge {
                    from: map(e.from),
                    to: map(e.to),
                    mode: e.mode,
                })
                .collect();
            edges.sort();
            let mut legs: Vec<VacuumLeg> = self
                .vacuum_legs
                .iter()
                .map(|l| VacuumLeg {
                    vertex: perm[l.vertex],
                    side: l.side,
                })
                .collect();
            legs.sort();
            let key = (edges, legs, links.clone());
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
        }
        best.expect("identity permutation always preserves the links")
    }

    /// Vertex groups connected by propagators, each with the sources it touches.
    fn components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut parent: Vec<usize> = (0..self.vertices).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for e in &self.edges {
            if let (Endpoint::Vertex(a), Endpoint::Vertex(b)) = (e.from, e.to) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
        let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for v in 0..self.vertices {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().0.push(v);
        }
        for e in &self.edges {
            let vertex = [e.from, e.to].into_iter().find_map(|p| match p {
                Endpoint::Vertex(v) => Some(v),
                _ => None,
            });
            let source = [e.from, e.to].into_iter().find_map(|p| match p {
                Endpoint::Source(s) => Some(s),
                _ => None,
            });
            if let (Some(v), Some(s)) = (vertex, source) {
                let r = find(&mut parent, v);
                groups.get_mut(&r).expect("vertex has a group").1.push(s);
            }
        }
        groups.into_values().collect()
    }

    /// True when some group of vertices connects to no source at all.
    pub fn is_vacuum_loop(&self) -> bool {
        self.vertices > 0
            && self
                .components()
                .iter()
                .any(|(_, sources)| sources.is_empty())
    }
}

impl fmt::Display for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |e: Endpoint| match e {
            Endpoint::Vertex(v) => format!("V{v}"),
            Endpoint::Source(s) => self.sources[s].clone(),
        };
        write!(
            f,
            "{}{}:",
            self.topology,
            if self.swapped { " [s<->i]" } else { "" }
        )?;
        let lines: Vec<String> = self
            .edges
            .iter()
            .map(|e| format!("{} -{}-> {}", name(e.from), e.mode.symbol(), name(e.to)))
            .collect();
        write!(f, " {}", lines.join(", "))?;
        let mut vac: Vec<String> = Vec::new();
        for l in &self.vacuum_legs {
            vac.push(match l.side {
                Side::In => format!(">V{}", l.vertex),
                Side::Out => format!("V{}>", l.vertex),
            });
        }
        for (a, b) in &self.vacuum_links {
            vac.push(format!("V{a}=V{b}"));
        }
        if !vac.is_empty() {
            write!(f, " | vacuum: {}", vac.join(" "))?;
        }
        Ok(())
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn line(from: Endpoint, to: Endpoint, mode: Mode) -> Edge {
    Edge { from, to, mode }
}

/// Base topologies of a given order, before the signal/idler swap.
fn catalogue(vertices: usize) -> Vec<Diagram> {
    use Endpoint::{Source as S, Vertex as V};
    use Mode::{Idler as I, Signal as Sg};
    let leg = |vertex, side| VacuumLeg { vertex, side };
    let through = vec![leg(0, Side::In), leg(0, Side::Out)];
    let chain = vec![leg(0, Side::In), leg(1, Side::Out)];
    let build = |name, v, edges, n, legs, links, process| {
        Diagram::new(name, v, edges, n, legs, links, process).expect("catalogue diagrams are valid")
    };
    match vertices {
        0 => vec![build(
            "bare",
            0,
            vec![line(S(0), S(1), Sg)],
            2,
            vec![],
            vec![],
            Process::Other,
        )],
        1 => vec![
            build(
                "spdc",
                1,
                vec![line(V(0), S(0), Sg), line(V(0), S(1), I)],
                2,
                through.clone(),
                vec![],
                Process::Spdc,
            ),
            build(
                "dfg",
                1,
                vec![line(S(0), V(0), Sg), line(V(0), S(1), I)],
                2,
                through.clone(),
                vec![],
                Process::Dfg,
            ),
            build(
                "sfg",
                1,
                vec![line(S(0), V(0), Sg), line(S(1), V(0), I)],
                2,
                through,
                vec![],
                Process::Sfg,
            ),
        ],
        2 => vec![
            build(
                "loop",
                2,
                vec![line(V(0), V(1), Sg), line(V(1), V(0), I)],
                0,
                chain.clone(),
                vec![(0, 1)],
                Process::VacuumLoop,
            ),
            build(
                "spdc-dfg",
                2,
                vec![
                    line(V(0), V(1), Sg),
                    line(V(0), S(0), I),
                    line(V(1), S(1), I),
                ],
                2,
                chain.clone(),
                vec![(0, 1)],
                Process::Other,
            ),
            build(
                "cascaded-spdc",
                2,
                vec![
                    line(V(0), S(0), Sg),
                    line(V(0), S(1), I),
                    line(V(1), S(2), Sg),
                    line(V(1), S(3), I),
                ],
                4,
                chain,
                vec![(0, 1)],
                Process::CascadedSpdc,
            ),
            build(
                "sfg-spdc",
                2,
                vec![
                    line(S(0), V(0), Sg),
                    line(S(1), V(0), I),
                    line(V(1), S(2), Sg),
                    line(V(1), S(3), I),
                ],
                4,
                vec![leg(1, Side::Out)],
                vec![(0, 1)],
                Process::Other,
            ),
            build(
                "dfg-sfg",
                2,
                vec![
                    line(S(0), V(0), Sg),
                    line(V(0), V(1), I),
                    line(S(1), V(1), Sg),
                ],
                2,
                vec![leg(0, Side::Out), leg(1, Side::Out)],
                vec![],
                Process::Other,
            ),
            build(
                "dfg-dfg",
                2,
                vec![
                    line(S(0), V(0), Sg),
                    line(V(0), V(1), I),
                    line(V(1), S(1), Sg),
                ],
                2,
                vec![leg(0, Side::Out), leg(1, Side::In)],
                vec![],
                Process::Other,
            ),
        ],
        _ => Vec::new(),
    }
}

/// Every diagram of order `vertices` (all propagator counts), swaps included,
/// deduplicated and sorted by canonical form.
pub fn enumerate_order(vertices: usize) -> Result<Vec<Diagram>> {
    if vertices > MAX_VERTICES {
        return Err(Error::UnsupportedOrder {
            vertices,
            propagators: 0,
        });
    }
    let mut keyed: BTreeMap<CanonicalForm, Diagram> = BTreeMap::new();
    for d in catalogue(vertices) {
        let s = d.swap_modes();
        keyed.entry(d.canonical_form()).or_insert(d);
        keyed.entry(s.canonical_form()).or_insert(s);
    }
    Ok(keyed.into_values().collect())
}

/// Diagrams with exactly `vertices` vertices and `propagators` lines.
pub fn enumerate_diagrams(vertices: usize, propagators: usize) -> Result<Vec<Diagram>> {
    if vertices > MAX_VERTICES || propagators > MAX_PROPAGATORS {
        return Err(Error::UnsupportedOrder {
            vertices,
            propagators,
        });
    }
    Ok(enumerate_order(vertices)?
        .into_iter()
        .filter(|d| d.propagator_count() == propagators)
        .collect())
}

/// Number of orderings of the current sources: `s!`.
pub fn symmetry_factor(d: &Diagram) -> u64 {
    (1..=d.sources.len() as u64).product()
}

/// Frequency and position bound to a source label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub omega: f64,
    pub x: f64,
}

impl Coordinate {
    pub fn new(omega: f64, x: f64) -> Self {
        Self { omega, x }
    }
}

/// Everything needed to turn a diagram into a number.
#[derive(Debug, Clone)]
pub struct EvaluationContext {
    medium: Chi2Medium,
    kin: ThreeWaveKinematics,
    propagator: DressedPropagator,
    coordinates: BTreeMap<String, Coordinate>,
    quad: QuadOptions,
}

impl EvaluationContext {
    /// Propagators are built on the linear medium of `medium` in the given mode;
    /// the numeric mode needs a validation grid.
    pub fn new(
        medium: Chi2Medium,
        kin: ThreeWaveKinematics,
        mode: PropagatorMode,
        grid: Option<Grid>,
    ) -> Result<Self> {
        let linear = medium.linear().clone();
        let propagator = match (mode, grid) {
            (PropagatorMode::Analytic1D, _) => DressedPropagator::analytic(linear)?,
            (PropagatorMode::Numeric1D, Some(g)) => DressedPropagator::numeric(linear, g)?,
            (PropagatorMode::Numeric1D, None) => {
                return Err(Error::Domain("numeric propagators need a grid".into()))
            }
        };
        Ok(Self::with_propagator(medium, kin, propagator))
    }

    pub fn with_propagator(
        medium: Chi2Medium,
        kin: ThreeWaveKinematics,
        propagator: DressedPropagator,
    ) -> Self {
        Self {
            medium,
            kin,
            propagator,
            coordinates: BTreeMap::new(),
            quad: QuadOptions::default().with_rel_tol(1e-10),
        }
    }

    pub fn bind(mut self, label: impl Into<String>, coordinate: Coordinate) -> Self {
        self.coordinates.insert(label.into(), coordinate);
        self
    }

    pub fn set_coordinate(&mut self, label: impl Into<String>, coordinate: Coordinate) {
        self.coordinates.insert(label.into(), coordinate);
    }

    pub fn with_quad_options(mut self, quad: QuadOptions) -> Self {
        self.quad = quad;
        self
    }

    pub fn coordinate(&self, label: &str) -> Result<Coordinate> {
        self.coordinates
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnboundCoordinate(label.to_string()))
    }

    pub fn medium(&self) -> &Chi2Medium {
        &self.medium
    }

    pub fn kinematics(&self) -> &ThreeWaveKinematics {
        &self.kin
    }

    pub fn propagator(&self) -> &DressedPropagator {
        &self.propagator
    }

    fn frequency_of(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Signal => self.kin.omega_s,
            Mode::Idler => self.kin.omega_i,
        }
    }

    fn check_frequency(&self, got: f64, want: f64) -> Result<()> {
        let tolerance = ENERGY_TOLERANCE * self.kin.pump.omega_p;
        if (got - want).abs() > tolerance {
            return Err(Error::ForbiddenProcess {
                delta_omega: got - want,
                tolerance,
            });
        }
        Ok(())
    }
}

fn pow_i(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Product of Feynman-rule factors with vertex positions integrated over the
/// nonlinear extent. Disconnected parts are integrated separately.
pub fn evaluate_amplitude(d: &Diagram, ctx: &EvaluationContext) -> Result<Complex64> {
    d.validate()?;
    if d.is_vacuum_loop() {
        return Err(Error::VacuumLoop);
    }
    check_energy(&ctx.kin)?;
    let coords: Vec<Coordinate> = d
        .sources
        .iter()
        .map(|l| ctx.coordinate(l))
        .collect::<Result<_>>()?;

    // Line frequencies: fixed by the mode at a vertex, by the sources otherwise.
    let mut freqs = Vec::with_capacity(d.edges.len());
    for e in &d.edges {
        let omega = if d.vertices == 0 {
            match (e.from, e.to) {
                (Endpoint::Source(a), Endpoint::Source(b)) => {
                    ctx.check_frequency(coords[b].omega, coords[a].omega)?;
                    coords[a].omega
                }
                _ => unreachable!("validated: no vertices means source-to-source"),
            }
        } else {
            ctx.frequency_of(e.mode)
        };
        for end in [e.from, e.to] {
            if let Endpoint::Source(s) = end {
                ctx.check_frequency(coords[s].omega, omega)?;
            }
        }
        freqs.push(omega);
    }
    let mut cache: Vec<(f64, FrequencyPropagator)> = Vec::new();
    let mut props = Vec::with_capacity(freqs.len());
    for &w in &freqs {
        let idx = match cache.iter().position(|(cw, _)| *cw == w) {
            Some(i) => i,
            None => {
                cache.push((w, ctx.propagator.at_frequency(w)?));
                cache.len() - 1
            }
        };
        props.push(idx);
    }
    let green = |k: usize, a: f64, b: f64| cache[props[k]].1.green(a, b);

    let prefactor = pow_i(3 * d.edges.len()) // (1/i)^P
        * pow_i(d.vertices)
        * pow_i(d.sources.len())
        / 6f64.powi(d.vertices as i32);

    let mut total = prefactor;
    for (k, e) in d.edges.iter().enumerate() {
        if let (Endpoint::Source(a), Endpoint::Source(b)) = (e.from, e.to) {
            total *= green(k, coords[a].x, coords[b].x);
        }
    }

    let (a, b) = ctx.medium.extent();
    let mut base_breaks: Vec<f64> = coords.iter().map(|c| c.x).collect();
    base_breaks.extend(ctx.medium.linear().interfaces());
    let pump = ctx.kin.pump;

    for (verts, _) in d.components() {
        let edge_ids: Vec<usize> = (0..d.edges.len())
            .filter(|&k| {
                [d.edges[k].from, d.edges[k].to]
                    .iter()
                    .any(|p| matches!(p, Endpoint::Vertex(v) if verts.contains(v)))
            })
            .collect();
        let position = |p: Endpoint, z: &[f64; MAX_VERTICES]| match p {
            Endpoint::Vertex(v) => z[v],
            Endpoint::Source(s) => coords[s].x,
        };
        let integrand = |z: &[f64; MAX_VERTICES]| {
            let mut acc = Complex64::new(1.0, 0.0);
            for &v in &verts {
                acc *= effective_coupling(&ctx.medium, &pump, z[v]);
            }
            for &k in &edge_ids {
                let e = d.edges[k];
                acc *= green(k, position(e.from, z), position(e.to, z));
            }
            acc
        };
        let value = match verts.as_slice() {
            [v] => {
                let v = *v;
                integrate_with_breakpoints(
                    |t| {
                        let mut z = [0.0; MAX_VERTICES];
                        z[v] = t;
                        integrand(&z)
                    },
                    a,
                    b,
                    &base_breaks,
                    &ctx.quad,
                )?
                .value
            }
            [v0, v1] => {
                let (v0, v1) = (*v0, *v1);
                let failure: RefCell<Option<Error>> = RefCell::new(None);
                let outer_opts = QuadOptions {
                    rel_tol: ctx.quad.rel_tol.max(1e-9),
                    ..ctx.quad
                };
                let outer = integrate_with_breakpoints(
                    |s| {
                        let mut breaks = base_breaks.clone();
                        breaks.push(s);
                        let inner = integrate_with_breakpoints(
                            |t| {
                                let mut z = [0.0; MAX_VERTICES];
                                z[v0] = s;
                                z[v1] = t;
                                integrand(&z)
                            },
                            a,
                            b,
                            &breaks,
                            &ctx.quad,
                        );
                        match inner {
                            Ok(r) => r.value,
                            Err(err) => {
                                failure.borrow_mut().get_or_insert(err);
                                Complex64::new(0.0, 0.0)
                            }
                        }
                    },
                    a,
                    b,
                    &base_breaks,
                    &outer_opts,
                )?;
                if let Some(err) = failure.into_inner() {
                    return Err(err);
                }
                outer.value
            }
            _ => {
                return Err(Error::UnsupportedOrder {
                    vertices: d.vertices,
                    propagators: d.edges.len(),
                })
            }
        };
        total *= value;
    }
    Ok(total)
}

/// Process selector for [`cross_section`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossSectionProcess {
    Spdc,
    Dfg,
    Sfg,
    /// Degenerate sum-frequency generation; same expression as `Sfg`.
    Shg,
    CascadedSpdc,
}

impl CrossSectionProcess {
    pub fn arity(self) -> usize {
        match self {
            Self::CascadedSpdc => 4,
            _ => 2,
        }
    }
}

fn pair_biphoton(
    ctx: &EvaluationContext,
    signal: Coordinate,
    idler: Coordinate,
) -> Result<Complex64> {
    ctx.check_frequency(signal.omega, ctx.kin.omega_s)?;
    ctx.check_frequency(idler.omega, ctx.kin.omega_i)?;
    biphoton_numeric(
        &ctx.medium,
        &ctx.kin,
        &ctx.propagator,
        &ctx.propagator,
        signal.x,
        idler.x,
    )
}

/// First order: `X(x, y) / hbar^2`, the same number for every first-order
/// process. Cascaded down-conversion: `24 X(x1, x2) X(x3, x4) / hbar^4`.
pub fn cross_section(
    process: CrossSectionProcess,
    ctx: &EvaluationContext,
    coords: &[Coordinate],
) -> Result<Complex64> {
    if coords.len() != process.arity() {
        return Err(Error::Arity {
            expected: process.arity(),
            got: coords.len(),
        });
    }
    match process {
        CrossSectionProcess::Spdc
        | CrossSectionProcess::Dfg
        | CrossSectionProcess::Sfg
        | CrossSectionProcess::Shg => Ok(pair_biphoton(ctx, coords[0], coords[1])? / (HBAR * HBAR)),
        CrossSectionProcess::CascadedSpdc => {
            let first = pair_biphoton(ctx, coords[0], coords[1])?;
            let second = pair_biphoton(ctx, coords[2], coords[3])?;
            Ok(first * second * 24.0 / HBAR.powi(4))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::SPEED_OF_LIGHT;
    use crate::greens::WaveVectorModel;
    use crate::media::{MediumProfile, Permittivity};
    use crate::nonlinear::{biphoton_1d_analytic, phase_mismatch, PumpField};
    use std::collections::BTreeSet;

    // Independent isomorphism test: try every vertex bijection that maps the
    // vacuum links onto themselves and compare edge and leg multisets.
    fn isomorphic(a: &Diagram, b: &Diagram) -> bool {
        if a.vertex_count() != b.vertex_count()
            || a.sources().len() != b.sources().len()
            || a.edges().len() != b.edges().len()
        {
            return false;
        }
        let n = a.vertex_count();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut all = Vec::new();
        heap_permute(&mut perm, n, &mut all);
        all.iter().any(|p| {
            let links_a: BTreeSet<_> = a
                .vacuum_links()
                .iter()
                .map(|&(x, y)| (p[x], p[y]))
                .collect();
            let links_b: BTreeSet<_> = b.vacuum_links().iter().copied().collect();
            let mut ea: Vec<_> = a
                .edges()
                .iter()
                .map(|e| {
                    let m = |q| match q {
                        Endpoint::Vertex(v) => Endpoint::Vertex(p[v]),
                        s => s,
                    };
                    (m(e.from), m(e.to), e.mode)
                })
                .collect();
            let mut eb: Vec<_> = b.edges().iter().map(|e| (e.from, e.to, e.mode)).collect();
            ea.sort();
            eb.sort();
            let mut la: Vec<_> = a
                .vacuum_legs()
                .iter()
                .map(|l| (p[l.vertex], l.side))
                .collect();
            let mut lb: Vec<_> = b.vacuum_legs().iter().map(|l| (l.vertex, l.side)).collect();
            la.sort();
            lb.sort();
            links_a == links_b && ea == eb && la == lb
        })
    }

    fn heap_permute(a: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap_permute(a, k - 1, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }

    // All single-vertex diagrams with two sources, labelled inputs first.
    fn brute_force_first_order() -> Vec<Diagram> {
        let mut out = Vec::new();
        for s_in in [false, true] {
            for i_in in [false, true] {
                for s_label in [0usize, 1] {
                    let i_label = 1 - s_label;
                    let edge = |mode, incoming: bool, label| {
                        if incoming {
                            line(Endpoint::Source(label), Endpoint::Vertex(0), mode)
                        } else {
                            line(Endpoint::Vertex(0), Endpoint::Source(label), mode)
                        }
                    };
                    // Inputs take the lowest labels.
                    if s_in != i_in && (s_in != (s_label == 0)) {
                        continue;
                    }
                    let d = Diagram::new(
                        "candidate",
                        1,
                        vec![
                            edge(Mode::Signal, s_in, s_label),
                            edge(Mode::Idler, i_in, i_label),
                        ],
                        2,
                        vec![
                            VacuumLeg {
                                vertex: 0,
                                side: Side::In,
                            },
                            VacuumLeg {
                                vertex: 0,
                                side: Side::Out,
                            },
                        ],
                        vec![],
                        Process::Other,
                    )
                    .unwrap();
                    if !out.iter().any(|o| isomorphic(o, &d)) {
                        out.push(d);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn counts_per_order() {
        assert_eq!(enumerate_diagrams(0, 1).unwrap().len(), 1);
        assert_eq!(enumerate_diagrams(1, 2).unwrap().len(), 6);
        let per_p: Vec<usize> = (0..=4)
            .map(|p| enumerate_diagrams(2, p).unwrap().len())
            .collect();
        assert_eq!(per_p, vec![0, 0, 2, 6, 4]);
        assert_eq!(enumerate_order(2).unwrap().len(), 12);
        assert!(enumerate_diagrams(1, 1).unwrap().is_empty());
    }

    #[test]
    fn unsupported_orders() {
        assert!(matches!(
            enumerate_diagrams(3, 2),
            Err(Error::UnsupportedOrder { .. })
        ));
        assert!(matches!(
            enumerate_diagrams(1, 5),
            Err(Error::UnsupportedOrder { .. })
        ));
        assert!(enumerate_order(3).is_err());
    }

    #[test]
    fn first_order_matches_brute_force() {
        let oracle = brute_force_first_order();
        let listed = enumerate_diagrams(1, 2).unwrap();
        assert_eq!(oracle.len(), listed.len());
        for d in &listed {
            assert!(oracle.iter().any(|o| isomorphic(o, d)), "{d}");
        }
    }

    #[test]
    fn enumerated_diagrams_pairwise_distinct_and_valid() {
        for v in 0..=2 {
            let list = enumerate_order(v).unwrap();
            let keys: BTreeSet<_> = list.iter().map(Diagram::canonical_form).collect();
            assert_eq!(keys.len(), list.len());
            for (i, a) in list.iter().enumerate() {
                a.validate().unwrap();
                for b in &list[i + 1..] {
                    assert!(!isomorphic(a, b), "{a} ~ {b}");
                }
            }
        }
    }

    #[test]
    fn swap_is_an_involution_on_the_set() {
        for v in 0..=2 {
            let list = enumerate_order(v).unwrap();
            for d in &list {
                let s = d.swap_modes();
                assert!(list.iter().any(|o| isomorphic(o, &s)));
                assert_eq!(s.swap_modes().canonical_form(), d.canonical_form());
            }
        }
    }

    #[test]
    fn canonical_form_ignores_vertex_numbering() {
        let d = &catalogue(2)[5];
        let mut relabelled = d.clone();
        for e in &mut relabelled.edges {
            for p in [&mut e.from, &mut e.to] {
                if let Endpoint::Vertex(v) = p {
                    *v = 1 - *v;
                }
            }
        }
        for l in &mut relabelled.vacuum_legs {
            l.vertex = 1 - l.vertex;
        }
        assert_eq!(d.canonical_form(), relabelled.canonical_form());
    }

    #[test]
    fn loop_is_flagged_and_kept() {
        let loops: Vec<_> = enumerate_order(2)
            .unwrap()
            .into_iter()
            .filter(|d| d.is_vacuum_loop())
            .collect();
        assert_eq!(loops.len(), 2);
        assert!(loops.iter().all(|d| d.process() == Process::VacuumLoop));
    }

    #[test]
    fn symmetry_factors() {
        let all: Vec<_> = (0..=2).flat_map(|v| enumerate_order(v).unwrap()).collect();
        for d in &all {
            let expected = match d.sources().len() {
                0 => 1,
                2 => 2,
                4 => 24,
                n => panic!("unexpected source count {n}"),
            };
            assert_eq!(symmetry_factor(d), expected, "{d}");
        }
    }

    #[test]
    fn invalid_diagram_rejected() {
        let err = Diagram::new(
            "bad",
            1,
            vec![
                line(Endpoint::Vertex(0), Endpoint::Source(0), Mode::Signal),
                line(Endpoint::Vertex(0), Endpoint::Source(1), Mode::Signal),
            ],
            2,
            vec![],
            vec![],
            Process::Other,
        );
        assert!(err.is_err());
    }

    struct Setup {
        ctx: EvaluationContext,
        medium: Chi2Medium,
        kin: ThreeWaveKinematics,
    }

    fn setup(chi: f64, dk: f64) -> Setup {
        let n = 1.5;
        let linear = MediumProfile::homogeneous("bulk", Permittivity::from_index(n));
        let omega_s = 1.1 * SPEED_OF_LIGHT;
        let omega_i = 0.9 * SPEED_OF_LIGHT;
        let k_s = WaveVectorModel::from_index(n).k(omega_s).unwrap();
        let k_i = WaveVectorModel::from_index(n).k(omega_i).unwrap();
        let pump = PumpField::new(
            1.3,
            0.4,
            omega_s + omega_i,
            Complex64::new(dk, 0.0) - k_s - k_i,
        )
        .unwrap();
        let kin = ThreeWaveKinematics::new(omega_s, omega_i, k_s, k_i, pump).unwrap();
        let medium = Chi2Medium::new(chi, 0.0, 2.0, linear).unwrap();
        let ctx =
            EvaluationContext::new(medium.clone(), kin, PropagatorMode::Analytic1D, None).unwrap();
        Setup { ctx, medium, kin }
    }

    fn find(topology: &str, swapped: bool) -> Diagram {
        (0..=2)
            .flat_map(|v| enumerate_order(v).unwrap())
            .find(|d| d.topology() == topology && d.is_swapped() == swapped)
            .unwrap()
    }

    #[test]
    fn spdc_amplitude_reproduces_closed_form() {
        for &dk in &[0.0, 0.8] {
            let s = setup(0.2, dk);
            let (x, y) = (-0.5, -1.5);
            let ctx = s
                .ctx
                .bind("x1", Coordinate::new(s.kin.omega_s, x))
                .bind("x2", Coordinate::new(s.kin.omega_i, y));
            let amp = evaluate_amplitude(&find("spdc", false), &ctx).unwrap();
            let dk_c = phase_mismatch(&s.kin);
            let closed = biphoton_1d_analytic(&s.medium, &s.kin, x, y).unwrap()
                * Complex64::new(0.0, 1.0 / 6.0)
                * -(Complex64::i() * dk_c * 1.0).exp();
            assert!(
                (amp - closed).norm() < 1e-6 * closed.norm(),
                "dk={dk}: {amp} vs {closed}"
            );
        }
    }

    #[test]
    fn first_order_source_exchange_symmetry() {
        let s = setup(0.2, 0.3);
        let a = Coordinate::new(s.kin.omega_s, 2.7);
        let b = Coordinate::new(s.kin.omega_i, -0.4);
        for name in ["spdc", "dfg", "sfg"] {
            let d = find(name, false);
            let ctx1 = s.ctx.clone().bind("x1", a).bind("x2", b);
            // Exchanged positions; the swapped diagram carries the idler on x1.
            let ctx2 = s
                .ctx
                .clone()
                .bind("x1", Coordinate::new(s.kin.omega_i, b.x))
                .bind("x2", Coordinate::new(s.kin.omega_s, a.x));
            let v1 = evaluate_amplitude(&d, &ctx1).unwrap();
            let v2 = evaluate_amplitude(&d.swap_modes(), &ctx2).unwrap();
            assert!((v1 - v2).norm() < 1e-9 * v1.norm(), "{name}");
        }
    }

    #[test]
    fn evaluation_errors() {
        let s = setup(0.2, 0.0);
        let spdc = find("spdc", false);
        assert!(matches!(
            evaluate_amplitude(&spdc, &s.ctx),
            Err(Error::UnboundCoordinate(_))
        ));
        let ctx = s
            .ctx
            .clone()
            .bind("x1", Coordinate::new(s.kin.omega_i, 0.0))
            .bind("x2", Coordinate::new(s.kin.omega_s, 1.0));
        assert!(matches!(
            evaluate_amplitude(&spdc, &ctx),
            Err(Error::ForbiddenProcess { .. })
        ));
        assert_eq!(
            evaluate_amplitude(&find("loop", false), &ctx),
            Err(Error::VacuumLoop)
        );
    }

    #[test]
    fn zero_susceptibility_gives_zero() {
        let s = setup(0.0, 0.0);
        let c = [
            Coordinate::new(s.kin.omega_s, 3.0),
            Coordinate::new(s.kin.omega_i, -1.0),
        ];
        let ctx = s.ctx.clone().bind("x1", c[0]).bind("x2", c[1]);
        assert_eq!(
            evaluate_amplitude(&find("spdc", false), &ctx).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        for p in [
            CrossSectionProcess::Spdc,
            CrossSectionProcess::Dfg,
            CrossSectionProcess::Sfg,
        ] {
            assert_eq!(
                cross_section(p, &s.ctx, &c).unwrap(),
                Complex64::new(0.0, 0.0)
            );
        }
        let c4 = [c[0], c[1], c[0], c[1]];
        assert_eq!(
            cross_section(CrossSectionProcess::CascadedSpdc, &s.ctx, &c4).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn cross_sections_equal_and_cascade_factor() {
        let s = setup(0.2, 0.5);
        let c = [
            Coordinate::new(s.kin.omega_s, 2.5),
            Coordinate::new(s.kin.omega_i, -1.0),
        ];
        let spdc = cross_section(CrossSectionProcess::Spdc, &s.ctx, &c).unwrap();
        for p in [
            CrossSectionProcess::Dfg,
            CrossSectionProcess::Sfg,
            CrossSectionProcess::Shg,
        ] {
            let v = cross_section(p, &s.ctx, &c).unwrap();
            assert_eq!(v.re.to_bits(), spdc.re.to_bits());
            assert_eq!(v.im.to_bits(), spdc.im.to_bits());
        }
        let casc = cross_section(
            CrossSectionProcess::CascadedSpdc,
            &s.ctx,
            &[c[0], c[1], c[0], c[1]],
        )
        .unwrap();
        let ratio = casc / (spdc * spdc);
        assert!((ratio - 24.0).norm() < 1e-12 * 24.0);
        assert!(matches!(
            cross_section(CrossSectionProcess::Spdc, &s.ctx, &c[..1]),
            Err(Error::Arity {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn cascaded_amplitude_factorises() {
        let s = setup(0.2, 0.2);
        let c = [
            Coordinate::new(s.kin.omega_s, 2.5),
            Coordinate::new(s.kin.omega_i, -1.0),
            Coordinate::new(s.kin.omega_s, -0.3),
            Coordinate::new(s.kin.omega_i, 3.1),
        ];
        let mut ctx = s.ctx.clone();
        for (k, cc) in c.iter().enumerate() {
            ctx.set_coordinate(format!("x{}", k + 1), *cc);
        }
        let casc = evaluate_amplitude(&find("cascaded-spdc", false), &ctx).unwrap();
        let one = |a: Coordinate, b: Coordinate| {
            let ctx = s.ctx.clone().bind("x1", a).bind("x2", b);
            evaluate_amplitude(&find("spdc", false), &ctx).unwrap()
        };
        let product = one(c[0], c[1]) * one(c[2], c[3]);
        assert!((casc - product).norm() < 1e-12 * product.norm());
    }

    #[test]
    fn connected_second_order_against_grid_sum() {
        let s = setup(0.2, 0.1);
        let (xa, xb) = (-0.7, 2.6);
        let ctx = s
            .ctx
            .clone()
            .bind("x1", Coordinate::new(s.kin.omega_s, xa))
            .bind("x2", Coordinate::new(s.kin.omega_s, xb));
        let d = find("dfg-dfg", false);
        let amp = evaluate_amplitude(&d, &ctx).unwrap();

        // Midpoint sum over the 2D vertex domain.
        let gs = ctx.propagator().at_frequency(s.kin.omega_s).unwrap();
        let gi = ctx.propagator().at_frequency(s.kin.omega_i).unwrap();
        let n = 1500;
        let h = 2.0 / n as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for p in 0..n {
            let z0 = (p as f64 + 0.5) * h;
            let l0 = effective_coupling(&s.medium, &s.kin.pump, z0) * gs.green(xa, z0);
            for q in 0..n {
                let z1 = (q as f64 + 0.5) * h;
                sum += l0
                    * gi.green(z0, z1)
                    * effective_coupling(&s.medium, &s.kin.pump, z1)
                    * gs.green(z1, xb);
            }
        }
        // (1/i)^3 (i/6)^2 i^2 = i/36
        let oracle = sum * h * h * Complex64::new(0.0, 1.0 / 36.0);
        assert!(
            (amp - oracle).norm() < 1e-5 * oracle.norm(),
            "{amp} vs {oracle}"
        );
    }

    #[test]
    fn bare_propagator_amplitude() {
        let s = setup(0.2, 0.0);
        let ctx = s
            .ctx
            .clone()
            .bind("x1", Coordinate::new(s.kin.omega_i, 0.3))
            .bind("x2", Coordinate::new(s.kin.omega_i, 1.9));
        let amp = evaluate_amplitude(&find("bare", false), &ctx).unwrap();
        let g = ctx.propagator().evaluate(s.kin.omega_i, 0.3, 1.9).unwrap();
        assert!((amp - g * Complex64::i()).norm() < 1e-15 * g.norm());
    }

    #[test]
    fn display_lists_lines() {
        let text = find("cascaded-spdc", false).to_string();
        assert!(text.contains("V0 -s-> x1"));
        assert!(text.contains("V1 -i-> x4"));
    }
}
