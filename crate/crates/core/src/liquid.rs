//! Random excitatory/inhibitory liquids of LIF neurons.
//!
//! Membrane potentials follow `tau_m dv/dt = -v + R I(t)` and are advanced
//! with the exact exponential integrator, which is exact for inputs that are
//! constant within a step. Synapses are current pulses: a presynaptic spike
//! adds `w * R` to the target's potential (input spikes in the step they
//! arrive, liquid spikes one step later). Inhibitory neurons act through the
//! same positive weights with the sign flipped at delivery.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::SpikeRecord;
use crate::num::Scalar;
use crate::seed;

#[derive(Debug, Error)]
pub enum LiquidError {
    #[error("invalid neuron parameters: {0}")]
    Params(String),
    #[error("invalid liquid config: {0}")]
    Config(String),
    #[error("{neurons} neurons cannot be split into {liquids} equal liquids")]
    Divisibility { neurons: usize, liquids: usize },
    #[error("input index {index} out of range for {inputs} input neurons")]
    InputOutOfRange { index: u32, inputs: usize },
    #[error("no training vectors to fit the normalizer on")]
    EmptyTraining,
}

pub type Result<T, E = LiquidError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct NeuronParams<S> {
    pub tau_m_ms: S,
    /// Membrane resistance; scales every injected current and pulse.
    pub r_mem: S,
    pub v_th: S,
    /// Reset and resting potential.
    pub v_reset: S,
    pub t_refrac_ms: S,
    pub dt_ms: S,
}

impl<S: Scalar> Default for NeuronParams<S> {
    fn default() -> Self {
        Self {
            tau_m_ms: S::of(30.0),
            r_mem: S::one(),
            v_th: S::of(25.0),
            v_reset: S::zero(),
            t_refrac_ms: S::of(2.0),
            dt_ms: S::one(),
        }
    }
}

impl<S: Scalar> NeuronParams<S> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LiquidError::Params(m.into()));
        if !(self.tau_m_ms > S::zero()) || !self.tau_m_ms.is_finite() {
            return bad("tau_m_ms must be positive");
        }
        if !(self.dt_ms > S::zero()) || !self.dt_ms.is_finite() {
            return bad("dt_ms must be positive");
        }
        if !(self.v_th > self.v_reset) {
            return bad("v_th must exceed v_reset");
        }
        if !(self.t_refrac_ms >= S::zero()) {
            return bad("t_refrac_ms must be non-negative");
        }
        if !self.r_mem.is_finite() || !self.v_reset.is_finite() {
            return bad("r_mem and v_reset must be finite");
        }
        Ok(())
    }

    /// Per-step decay factor `exp(-dt / tau_m)`.
    pub fn decay(&self) -> S {
        (-self.dt_ms / self.tau_m_ms).exp()
    }

    pub fn refractory_steps(&self) -> u32 {
        (self.t_refrac_ms / self.dt_ms).round().to_u32().unwrap_or(0)
    }

    pub fn cast<T: Scalar>(&self) -> NeuronParams<T> {
        let c = |x: S| T::of(x.as_f64());
        NeuronParams {
            tau_m_ms: c(self.tau_m_ms),
            r_mem: c(self.r_mem),
            v_th: c(self.v_th),
            v_reset: c(self.v_reset),
            t_refrac_ms: c(self.t_refrac_ms),
            dt_ms: c(self.dt_ms),
        }
    }
}

/// Hyper-parameters of one liquid. Connection probabilities are indexed
/// `c_<pre><post>`, so `c_ei` is excitatory to inhibitory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiquidConfig {
    pub n_neurons: usize,
    /// Excitatory fraction.
    pub eir: f64,
    pub c_ee: f64,
    pub c_ei: f64,
    pub c_ie: f64,
    pub c_ii: f64,
    /// Probability of each input -> excitatory connection.
    pub ir: f64,
    /// Probability that an excitatory neuron feeds the readout.
    pub or_ratio: f64,
    pub weight_mean: f64,
    pub weight_var: f64,
    pub seed: u64,
}

impl Default for LiquidConfig {
    fn default() -> Self {
        Self::mnist(1000)
    }
}

impl LiquidConfig {
    /// Settings used for MNIST and N-MNIST.
    pub fn mnist(n_neurons: usize) -> Self {
        Self {
            n_neurons,
            eir: 0.8,
            c_ee: 0.4,
            c_ei: 0.4,
            c_ie: 0.5,
            c_ii: 0.0,
            ir: 0.2,
            or_ratio: 0.9,
            weight_mean: 0.5,
            weight_var: 0.16,
            seed: 0,
        }
    }

    /// Settings for the 10x45 face crops.
    pub fn jaffe1(n_neurons: usize) -> Self {
        Self {
            c_ee: 0.3,
            c_ei: 0.2,
            c_ie: 0.4,
            c_ii: 0.1,
            ir: 0.1,
            ..Self::mnist(n_neurons)
        }
    }

    /// Settings for the 45x45 face crops.
    pub fn jaffe2(n_neurons: usize) -> Self {
        Self {
            ir: 0.05,
            ..Self::jaffe1(n_neurons)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_neurons == 0 {
            return Err(LiquidError::Config("n_neurons must be at least 1".into()));
        }
        for (name, p) in [
            ("eir", self.eir),
            ("c_ee", self.c_ee),
            ("c_ei", self.c_ei),
            ("c_ie", self.c_ie),
            ("c_ii", self.c_ii),
            ("ir", self.ir),
            ("or_ratio", self.or_ratio),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(LiquidError::Config(format!("{name} = {p} not in [0, 1]")));
            }
        }
        if !self.weight_mean.is_finite() || !(self.weight_var >= 0.0) || !self.weight_var.is_finite()
        {
            return Err(LiquidError::Config("weight moments must be finite".into()));
        }
        Ok(())
    }

    pub fn n_excitatory(&self) -> usize {
        (self.eir * self.n_neurons as f64).floor() as usize
    }

    /// Connection probability for an ordered `(pre, post)` type pair.
    pub fn connection_probability(&self, pre: NeuronType, post: NeuronType) -> f64 {
        use NeuronType::*;
        match (pre, post) {
            (Excitatory, Excitatory) => self.c_ee,
            (Excitatory, Inhibitory) => self.c_ei,
            (Inhibitory, Excitatory) => self.c_ie,
            (Inhibitory, Inhibitory) => self.c_ii,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeuronType {
    Excitatory,
    Inhibitory,
}

impl NeuronType {
    fn sign<S: Scalar>(self) -> S {
        match self {
            Self::Excitatory => S::one(),
            Self::Inhibitory => -S::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synapse<S> {
    pub pre: u32,
    pub post: u32,
    /// Sampled weight, as drawn from the initialization distribution.
    pub weight: S,
}

/// Outgoing synapses grouped by presynaptic neuron.
#[derive(Debug, Clone, PartialEq)]
struct Fanout<S> {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    weights: Vec<S>,
    /// Delivered pulse per unit resistance: the weight clipped at zero, with
    /// the presynaptic sign applied.
    efficacy: Vec<S>,
}

impl<S: Scalar> Fanout<S> {
    fn with_sources(n: usize) -> Self {
        Self {
            offsets: Vec::with_capacity(n + 1),
            targets: Vec::new(),
            weights: Vec::new(),
            efficacy: Vec::new(),
        }
    }

    fn start(&mut self) {
        self.offsets.push(self.targets.len() as u32);
    }

    fn push(&mut self, post: u32, weight: S, sign: S) {
        self.targets.push(post);
        self.weights.push(weight);
        self.efficacy.push(sign * weight.max(S::zero()));
    }

    fn finish(&mut self) {
        self.offsets.push(self.targets.len() as u32);
    }

    #[inline]
    fn range(&self, pre: usize) -> std::ops::Range<usize> {
        self.offsets[pre] as usize..self.offsets[pre + 1] as usize
    }

    fn sources(&self) -> usize {
        self.offsets.len() - 1
    }

    fn synapses(&self) -> impl Iterator<Item = Synapse<S>> + '_ {
        (0..self.sources()).flat_map(move |pre| {
            self.range(pre).map(move |k| Synapse {
                pre: pre as u32,
                post: self.targets[k],
                weight: self.weights[k],
            })
        })
    }
}

/// A realized random liquid. Neurons `0..n_excitatory` are excitatory, the
/// rest inhibitory. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidTopology<S> {
    n_inputs: usize,
    n_neurons: usize,
    n_excitatory: usize,
    input: Fanout<S>,
    recurrent: Fanout<S>,
    readout_mask: Vec<bool>,
}

impl<S: Scalar> LiquidTopology<S> {
    /// Samples a liquid: every ordered pair `i != j` connects independently
    /// with the probability of its type pair, every (input, excitatory) pair
    /// with `ir`, and each excitatory neuron joins the readout with
    /// `or_ratio`. Weights are drawn from `Normal(weight_mean, weight_var)`.
    pub fn build(cfg: &LiquidConfig, n_inputs: usize) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_neurons;
        let n_exc = cfg.n_excitatory();
        let mut rng = seed::rng(cfg.seed);
        let normal = Normal::new(cfg.weight_mean, cfg.weight_var.sqrt())
            .map_err(|e| LiquidError::Config(e.to_string()))?;
        let type_of = |i: usize| {
            if i < n_exc {
                NeuronType::Excitatory
            } else {
                NeuronType::Inhibitory
            }
        };

        let mut input = Fanout::with_sources(n_inputs);
        for _ in 0..n_inputs {
            input.start();
            for post in 0..n_exc {
                if rng.gen_bool(cfg.ir) {
                    input.push(post as u32, S::of(normal.sample(&mut rng)), S::one());
                }
            }
        }
        input.finish();

        let mut recurrent = Fanout::with_sources(n);
        for pre in 0..n {
            recurrent.start();
            let pre_type = type_of(pre);
            let sign = pre_type.sign::<S>();
            for post in 0..n {
                if post == pre {
                    continue;
                }
                let p = cfg.connection_probability(pre_type, type_of(post));
                if rng.gen_bool(p) {
                    recurrent.push(post as u32, S::of(normal.sample(&mut rng)), sign);
                }
            }
        }
        recurrent.finish();

        let readout_mask = (0..n_exc).map(|_| rng.gen_bool(cfg.or_ratio)).collect();
        Ok(Self {
            n_inputs,
            n_neurons: n,
            n_excitatory: n_exc,
            input,
            recurrent,
            readout_mask,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_excitatory(&self) -> usize {
        self.n_excitatory
    }

    pub fn neuron_type(&self, i: usize) -> NeuronType {
        if i < self.n_excitatory {
            NeuronType::Excitatory
        } else {
            NeuronType::Inhibitory
        }
    }

    pub fn readout_mask(&self) -> &[bool] {
        &self.readout_mask
    }

    pub fn input_synapses(&self) -> impl Iterator<Item = Synapse<S>> + '_ {
        self.input.synapses()
    }

    pub fn recurrent_synapses(&self) -> impl Iterator<Item = Synapse<S>> + '_ {
        self.recurrent.synapses()
    }

    pub fn n_input_synapses(&self) -> usize {
        self.input.targets.len()
    }

    pub fn n_recurrent_synapses(&self) -> usize {
        self.recurrent.targets.len()
    }

    /// Assembles a topology from explicit synapse lists, for hand-wired
    /// circuits. Synapses must be listed grouped by ascending `pre`.
    pub fn from_synapses(
        n_inputs: usize,
        n_neurons: usize,
        n_excitatory: usize,
        input: &[Synapse<S>],
        recurrent: &[Synapse<S>],
        readout_mask: Vec<bool>,
    ) -> Result<Self> {
        if n_excitatory > n_neurons || readout_mask.len() != n_excitatory {
            return Err(LiquidError::Config(
                "excitatory count or readout mask inconsistent with neuron count".into(),
            ));
        }
        let pack = |syn: &[Synapse<S>], sources: usize, typed: bool| -> Result<Fanout<S>> {
            if syn.windows(2).any(|w| w[0].pre > w[1].pre) {
                return Err(LiquidError::Config("synapses not grouped by pre".into()));
            }
            let mut f = Fanout::with_sources(sources);
            let mut k = 0;
            for pre in 0..sources {
                f.start();
                while k < syn.len() && syn[k].pre as usize == pre {
                    let s = syn[k];
                    if s.post as usize >= n_neurons || (typed && s.pre == s.post) {
                        return Err(LiquidError::Config(format!("bad synapse {s:?}")));
                    }
                    let sign = if typed && pre >= n_excitatory {
                        -S::one()
                    } else {
                        S::one()
                    };
                    f.push(s.post, s.weight, sign);
                    k += 1;
                }
            }
            if k != syn.len() {
                return Err(LiquidError::Config("synapse source out of range".into()));
            }
            f.finish();
            Ok(f)
        };
        Ok(Self {
            n_inputs,
            n_neurons,
            n_excitatory,
            input: pack(input, n_inputs, false)?,
            recurrent: pack(recurrent, n_neurons, true)?,
            readout_mask,
        })
    }

    /// Runs one record through the liquid and returns the spike count of
    /// every excitatory neuron (readout mask not applied).
    pub fn simulate(&self, params: &NeuronParams<S>, record: &SpikeRecord) -> Result<Vec<u32>> {
        let mut counts = vec![0u32; self.n_excitatory];
        self.run(params, record, |fired| {
            for &i in fired {
                if (i as usize) < counts.len() {
                    counts[i as usize] += 1;
                }
            }
        })?;
        Ok(counts)
    }

    /// Like [`simulate`](Self::simulate) but reports every step's spikes.
    pub fn simulate_raster(
        &self,
        params: &NeuronParams<S>,
        record: &SpikeRecord,
    ) -> Result<Vec<Vec<u32>>> {
        let mut raster = Vec::new();
        self.run(params, record, |fired| raster.push(fired.to_vec()))?;
        Ok(raster)
    }

    fn run(
        &self,
        params: &NeuronParams<S>,
        record: &SpikeRecord,
        mut on_step: impl FnMut(&[u32]),
    ) -> Result<()> {
        params.validate()?;
        let dt = params.dt_ms.as_f64();
        let steps = (record.duration_ms as f64 / dt).ceil() as usize;

        // Bucket input spikes by step (counting sort keeps input order).
        let mut bucket_start = vec![0u32; steps + 1];
        let mut step_of = Vec::with_capacity(record.len());
        for (idx, t) in record.iter() {
            if idx as usize >= self.n_inputs {
                return Err(LiquidError::InputOutOfRange {
                    index: idx,
                    inputs: self.n_inputs,
                });
            }
            let s = (t as f64 / dt).floor();
            let s = if s >= 0.0 && (s as usize) < steps {
                s as usize
            } else {
                usize::MAX
            };
            if s != usize::MAX {
                bucket_start[s + 1] += 1;
            }
            step_of.push(s);
        }
        for s in 0..steps {
            bucket_start[s + 1] += bucket_start[s];
        }
        let mut fill = bucket_start.clone();
        let mut bucketed = vec![0u32; bucket_start[steps] as usize];
        for (k, &s) in step_of.iter().enumerate() {
            if s != usize::MAX {
                bucketed[fill[s] as usize] = record.indices[k];
                fill[s] += 1;
            }
        }

        let mut pop = LifPopulation::new(*params, self.n_neurons);
        let mut pulses = vec![S::zero(); self.n_neurons];
        let mut fired = Vec::new();
        let r = params.r_mem;
        for s in 0..steps {
            // Liquid spikes of the previous step arrive now.
            for &pre in &fired {
                for k in self.recurrent.range(pre as usize) {
                    pulses[self.recurrent.targets[k] as usize] =
                        pulses[self.recurrent.targets[k] as usize] + self.recurrent.efficacy[k] * r;
                }
            }
            for &inp in &bucketed[bucket_start[s] as usize..bucket_start[s + 1] as usize] {
                for k in self.input.range(inp as usize) {
                    let post = self.input.targets[k] as usize;
                    pulses[post] = pulses[post] + self.input.efficacy[k] * r;
                }
            }
            pop.step(None, &pulses, &mut fired);
            pulses.iter_mut().for_each(|p| *p = S::zero());
            on_step(&fired);
        }
        Ok(())
    }
}

/// Membrane state of a population of identical LIF neurons.
#[derive(Debug, Clone)]
pub struct LifPopulation<S> {
    params: NeuronParams<S>,
    decay: S,
    refrac_steps: u32,
    v: Vec<S>,
    refractory: Vec<u32>,
}

impl<S: Scalar> LifPopulation<S> {
    pub fn new(params: NeuronParams<S>, n: usize) -> Self {
        Self {
            decay: params.decay(),
            refrac_steps: params.refractory_steps(),
            v: vec![params.v_reset; n],
            refractory: vec![0; n],
            params,
        }
    }

    pub fn potentials(&self) -> &[S] {
        &self.v
    }

    /// Advances one step.
    ///
    /// `current[i]` is a current held constant over the step and integrated
    /// exactly: `v <- v e^{-dt/tau} + R I (1 - e^{-dt/tau})`. `pulses[i]` is
    /// added to the potential directly. Refractory neurons stay at `v_reset`
    /// and ignore input. Indices of neurons that crossed `v_th` are written
    /// to `fired`.
    pub fn step(&mut self, current: Option<&[S]>, pulses: &[S], fired: &mut Vec<u32>) {
        fired.clear();
        let p = &self.params;
        let gain = S::one() - self.decay;
        for i in 0..self.v.len() {
            if self.refractory[i] > 0 {
                self.refractory[i] -= 1;
                self.v[i] = p.v_reset;
                continue;
            }
            // Decay towards rest, not towards zero.
            let mut v = p.v_reset + (self.v[i] - p.v_reset) * self.decay + pulses[i];
            if let Some(c) = current {
                v = v + p.r_mem * c[i] * gain;
            }
            if v >= p.v_th {
                fired.push(i as u32);
                v = p.v_reset;
                self.refractory[i] = self.refrac_steps;
            }
            self.v[i] = v;
        }
    }
}

/// Liquid arrangement: one liquid, or several smaller ones sharing the
/// neuron budget and the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "1rc")]
    Rc1,
    #[serde(rename = "5rc")]
    Rc5,
}

impl Architecture {
    pub fn liquids(&self) -> usize {
        match self {
            Self::Rc1 => 1,
            Self::Rc5 => 5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rc1 => "1rc",
            Self::Rc5 => "5rc",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1rc" => Some(Self::Rc1),
            "5rc" => Some(Self::Rc5),
            _ => None,
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One or more liquids driven by the same input layer. State vectors are the
/// excitatory counts of each liquid concatenated in liquid order, with
/// neurons outside the readout mask zeroed.
#[derive(Debug, Clone)]
pub struct Reservoir<S> {
    liquids: Vec<LiquidTopology<S>>,
    params: NeuronParams<S>,
}

impl<S: Scalar> Reservoir<S> {
    /// Liquid `k` is built with seed `derive(cfg.seed, TOPOLOGY, k)`.
    pub fn build(
        arch: Architecture,
        cfg: &LiquidConfig,
        params: NeuronParams<S>,
        n_inputs: usize,
    ) -> Result<Self> {
        params.validate()?;
        let k = arch.liquids();
        if cfg.n_neurons % k != 0 {
            return Err(LiquidError::Divisibility {
                neurons: cfg.n_neurons,
                liquids: k,
            });
        }
        let liquids = (0..k)
            .into_par_iter()
            .map(|i| {
                let sub = LiquidConfig {
                    n_neurons: cfg.n_neurons / k,
                    seed: seed::derive(cfg.seed, seed::stream::TOPOLOGY, i as u64),
                    ..*cfg
                };
                LiquidTopology::build(&sub, n_inputs)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { liquids, params })
    }

    pub fn liquids(&self) -> &[LiquidTopology<S>] {
        &self.liquids
    }

    pub fn params(&self) -> &NeuronParams<S> {
        &self.params
    }

    /// Length of a state vector: total excitatory neurons over all liquids.
    pub fn n_features(&self) -> usize {
        self.liquids.iter().map(|l| l.n_excitatory()).sum()
    }

    /// Masked, concatenated spike counts for one record.
    pub fn counts(&self, record: &SpikeRecord) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(self.n_features());
        for liquid in &self.liquids {
            let counts = liquid.simulate(&self.params, record)?;
            out.extend(
                counts
                    .into_iter()
                    .zip(liquid.readout_mask())
                    .map(|(c, &keep)| if keep { c } else { 0 }),
            );
        }
        Ok(out)
    }

    /// Counts for many records, simulated in parallel; output order follows
    /// input order.
    pub fn counts_batch(&self, records: &[SpikeRecord]) -> Result<Vec<Vec<u32>>> {
        records.par_iter().map(|r| self.counts(r)).collect()
    }
}

/// Per-sample readout features.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<S> {
    pub counts: Vec<u32>,
    pub normalized: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide by the largest count anywhere in the training split.
    #[default]
    Global,
    /// Divide each neuron by its own largest training count.
    PerNeuron,
}

/// Count-to-`[0, 1]` scaling fitted on the training split and reused for
/// test vectors (which are clipped at 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    divisors: Vec<u32>,
}

impl Normalizer {
    pub fn fit(train: &[Vec<u32>], mode: Normalization) -> Result<Self> {
        let width = train.first().ok_or(LiquidError::EmptyTraining)?.len();
        let divisors = match mode {
            Normalization::Global => {
                let max = train.iter().flatten().copied().max().unwrap_or(0).max(1);
                vec![max; width]
            }
            Normalization::PerNeuron => (0..width)
                .map(|j| train.iter().map(|v| v[j]).max().unwrap_or(0).max(1))
                .collect(),
        };
        Ok(Self { divisors })
    }

    pub fn divisors(&self) -> &[u32] {
        &self.divisors
    }

    pub fn apply<S: Scalar>(&self, counts: Vec<u32>) -> StateVector<S> {
        let normalized = counts
            .iter()
            .zip(&self.divisors)
            .map(|(&c, &d)| S::of(c as f64 / d as f64).min(S::one()))
            .collect();
        StateVector { counts, normalized }
    }
}

/// Train and test state vectors of one reservoir run.
#[derive(Debug, Clone)]
pub struct ReservoirOutput<S> {
    pub train: Vec<StateVector<S>>,
    pub test: Vec<StateVector<S>>,
    pub normalizer: Normalizer,
}

/// Builds the reservoir, simulates both splits and normalizes with the
/// training statistics.
pub fn run_reservoir<S: Scalar>(
    arch: Architecture,
    cfg: &LiquidConfig,
    params: NeuronParams<S>,
    n_inputs: usize,
    train: &[SpikeRecord],
    test: &[SpikeRecord],
    mode: Normalization,
) -> Result<ReservoirOutput<S>> {
    let reservoir = Reservoir::build(arch, cfg, params, n_inputs)?;
    let train_counts = reservoir.counts_batch(train)?;
    let test_counts = reservoir.counts_batch(test)?;
    let normalizer = Normalizer::fit(&train_counts, mode)?;
    Ok(ReservoirOutput {
        train: train_counts.into_iter().map(|c| normalizer.apply(c)).collect(),
        test: test_counts.into_iter().map(|c| normalizer.apply(c)).collect(),
        normalizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> NeuronParams<f64> {
        NeuronParams::default()
    }

    #[test]
    fn no_connections_when_probabilities_zero() {
        let cfg = LiquidConfig {
            c_ee: 0.0,
            c_ei: 0.0,
            c_ie: 0.0,
            c_ii: 0.0,
            ..LiquidConfig::mnist(100)
        };
        let t = LiquidTopology::<f64>::build(&cfg, 10).unwrap();
        assert_eq!(t.n_recurrent_synapses(), 0);
        assert!(t.n_input_synapses() > 0);
    }

    #[test]
    fn type_split_follows_eir() {
        let t = LiquidTopology::<f32>::build(&LiquidConfig::mnist(1000), 4).unwrap();
        assert_eq!(t.n_excitatory(), 800);
        assert_eq!(t.n_neurons() - t.n_excitatory(), 200);
        assert_eq!(t.readout_mask().len(), 800);
        assert_eq!(t.neuron_type(799), NeuronType::Excitatory);
        assert_eq!(t.neuron_type(800), NeuronType::Inhibitory);
    }

    #[test]
    fn mnist_liquid_has_no_inhibitory_pairs_and_no_self_loops() {
        let t = LiquidTopology::<f64>::build(&LiquidConfig::mnist(300), 0).unwrap();
        for s in t.recurrent_synapses() {
            assert_ne!(s.pre, s.post);
            assert!(
                !(t.neuron_type(s.pre as usize) == NeuronType::Inhibitory
                    && t.neuron_type(s.post as usize) == NeuronType::Inhibitory)
            );
        }
    }

    #[test]
    fn inputs_only_reach_excitatory_neurons() {
        let t = LiquidTopology::<f64>::build(&LiquidConfig::mnist(50), 30).unwrap();
        assert!(t.input_synapses().all(|s| (s.post as usize) < t.n_excitatory()));
    }

    #[test]
    fn topology_is_seeded() {
        let cfg = LiquidConfig::jaffe1(80);
        let a = LiquidTopology::<f64>::build(&cfg, 20).unwrap();
        let b = LiquidTopology::<f64>::build(&cfg, 20).unwrap();
        assert_eq!(a, b);
        let c = LiquidTopology::<f64>::build(&LiquidConfig { seed: 1, ..cfg }, 20).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = LiquidConfig::mnist(10);
        cfg.c_ee = 1.5;
        assert!(LiquidTopology::<f64>::build(&cfg, 1).is_err());
        let mut p = params();
        p.v_th = -1.0;
        assert!(p.validate().is_err());
        p = params();
        p.tau_m_ms = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn silent_input_gives_silent_liquid() {
        let t = LiquidTopology::<f64>::build(&LiquidConfig::mnist(100), 10).unwrap();
        let counts = t.simulate(&params(), &SpikeRecord::new(0, 100.0)).unwrap();
        assert!(counts.iter().all(|&c| c == 0));
    }

    fn one_to_one(weight: f64) -> LiquidTopology<f64> {
        LiquidTopology::from_synapses(
            1,
            1,
            1,
            &[Synapse {
                pre: 0,
                post: 0,
                weight,
            }],
            &[],
            vec![true],
        )
        .unwrap()
    }

    #[test]
    fn strong_input_spike_fires_in_same_step() {
        let t = one_to_one(25.0);
        let mut rec = SpikeRecord::new(0, 10.0);
        rec.push(0, 3.0);
        let raster = t.simulate_raster(&params(), &rec).unwrap();
        let fired: Vec<usize> = (0..raster.len()).filter(|&s| !raster[s].is_empty()).collect();
        assert_eq!(fired, [3]);
        assert_eq!(t.simulate(&params(), &rec).unwrap(), [1]);
    }

    #[test]
    fn refractory_neuron_ignores_input() {
        let t = one_to_one(25.0);
        let mut rec = SpikeRecord::new(0, 10.0);
        for s in 0..10 {
            rec.push(0, s as f32);
        }
        let raster = t.simulate_raster(&params(), &rec).unwrap();
        let fired: Vec<usize> = (0..raster.len()).filter(|&s| !raster[s].is_empty()).collect();
        // t_refrac = 2 steps: fire, sit out two steps, fire again.
        assert_eq!(fired, [0, 3, 6, 9]);
    }

    #[test]
    fn out_of_range_input_rejected() {
        let t = one_to_one(1.0);
        let mut rec = SpikeRecord::new(0, 10.0);
        rec.push(1, 0.0);
        assert!(matches!(
            t.simulate(&params(), &rec),
            Err(LiquidError::InputOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn inhibitory_spikes_pull_down() {
        // Input drives I neuron 1 over threshold; it inhibits E neuron 0.
        let input = [
            Synapse { pre: 0, post: 1, weight: 25.0 },
            Synapse { pre: 1, post: 0, weight: 10.0 },
        ];
        let rec_syn = [Synapse { pre: 1, post: 0, weight: 4.0 }];
        let t = LiquidTopology::from_synapses(2, 2, 1, &input, &rec_syn, vec![true]).unwrap();
        let mut rec = SpikeRecord::new(0, 3.0);
        rec.push(0, 0.0);
        rec.push(1, 0.0);
        let mut pop_ref = 10.0f64;
        // Step 0: neuron 0 gets +10, neuron 1 fires. Step 1: neuron 0 decays
        // and receives -4.
        pop_ref = pop_ref * params().decay() - 4.0;
        let mut pop = LifPopulation::new(params(), 2);
        let mut fired = Vec::new();
        pop.step(None, &[10.0, 25.0], &mut fired);
        assert_eq!(fired, [1]);
        pop.step(None, &[-4.0, 0.0], &mut fired);
        assert!((pop.potentials()[0] - pop_ref).abs() < 1e-12);
        assert_eq!(t.simulate(&params(), &rec).unwrap(), [0]);
    }

    #[test]
    fn negative_weights_never_flip_sign() {
        let input = [Synapse { pre: 0, post: 0, weight: -30.0 }];
        let t = LiquidTopology::from_synapses(1, 1, 1, &input, &[], vec![true]).unwrap();
        let mut rec = SpikeRecord::new(0, 5.0);
        rec.push(0, 0.0);
        let mut pop = LifPopulation::new(params(), 1);
        let mut fired = Vec::new();
        pop.step(None, &[0.0], &mut fired);
        assert_eq!(t.simulate(&params(), &rec).unwrap(), [0]);
        assert_eq!(pop.potentials()[0], 0.0);
    }

    #[test]
    fn five_liquids_split_budget() {
        let cfg = LiquidConfig::mnist(1000);
        let r = Reservoir::<f32>::build(Architecture::Rc5, &cfg, NeuronParams::default(), 3).unwrap();
        assert_eq!(r.liquids().len(), 5);
        assert!(r.liquids().iter().all(|l| l.n_neurons() == 200));
        assert_eq!(r.n_features(), 800);
        assert_ne!(r.liquids()[0], r.liquids()[1]);
        assert!(matches!(
            Reservoir::<f32>::build(Architecture::Rc5, &LiquidConfig::mnist(1001), NeuronParams::default(), 3),
            Err(LiquidError::Divisibility { .. })
        ));
    }

    #[test]
    fn normalizer_divides_by_training_max() {
        let n = Normalizer::fit(&[vec![40, 3], vec![10, 0]], Normalization::Global).unwrap();
        let v: StateVector<f64> = n.apply(vec![20, 80]);
        assert_eq!(v.normalized, [0.5, 1.0]);
        let zero = Normalizer::fit(&[vec![0, 0]], Normalization::Global).unwrap();
        assert_eq!(zero.divisors(), [1, 1]);
        let per = Normalizer::fit(&[vec![4, 2], vec![1, 8]], Normalization::PerNeuron).unwrap();
        assert_eq!(per.divisors(), [4, 8]);
        assert!(Normalizer::fit(&[], Normalization::Global).is_err());
    }
}
