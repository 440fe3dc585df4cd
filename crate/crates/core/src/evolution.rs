//! Evolutionary search for a port mapping that explains measured
//! throughputs.
//!
//! Individuals are three-level mappings. Each generation recombines
//! uniformly sampled parents into `p` children, scores all `2p` mappings by
//! the scalarized sum of normalized prediction error and µop volume, and
//! keeps the best `p`. There is no mutation operator; the initial population
//! supplies all µop shapes and recombination redistributes them.
//!
//! The scalarized fitness is relative to the current population, so once
//! the population has narrowed it no longer ranks accuracy against volume in
//! any absolute sense. The result is therefore the survivor with the lowest
//! `(d_avg, volume)`, which selection always retains, refined by a greedy
//! hill-climb over multiplicities.
//!
//! Randomness is confined to initialization, parent sampling and
//! recombination, all serial. Fitness evaluation runs on the ambient rayon
//! pool and is order-independent, so thread count never changes the result.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expgen::guarded_ceil;
use crate::model::{InstructionId, MeasurementSet, PortMapping3, PortSet};
use crate::sim::{bottleneck_masks, MAX_SIM_PORTS};

/// Normalized range of each objective after scalarization.
pub const OBJECTIVE_SCALE: f64 = 1000.0;

/// Training measurements compiled to instruction indices.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    names: Vec<InstructionId>,
    index: BTreeMap<InstructionId, usize>,
    experiments: Vec<(Vec<(usize, u64)>, f64)>,
}

impl TrainingSet {
    /// Every experiment must use only instructions from `isa`.
    pub fn new(meas: &MeasurementSet, isa: &[InstructionId]) -> Result<Self> {
        if meas.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut names = isa.to_vec();
        names.sort();
        names.dedup();
        let index: BTreeMap<InstructionId, usize> = names
            .iter()
            .cloned()
            .enumerate()
            .map(|(k, i)| (i, k))
            .collect();
        let experiments = meas
            .iter()
            .map(|m| {
                let items = m
                    .experiment
                    .counts()
                    .map(|(i, c)| {
                        index
                            .get(i)
                            .map(|&k| (k, c as u64))
                            .ok_or_else(|| Error::UnmappedInstruction(i.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((items, m.cycles))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingSet {
            names,
            index,
            experiments,
        })
    }

    pub fn len(&self) -> usize {
        self.experiments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiments.is_empty()
    }

    fn compile(&self, m: &PortMapping3) -> Result<Vec<Vec<(u32, u64)>>> {
        self.names
            .iter()
            .map(|i| {
                m.uops(i)
                    .map(|us| us.iter().map(|(u, &n)| (u.mask(), n as u64)).collect())
                    .ok_or_else(|| Error::UnmappedInstruction(i.clone()))
            })
            .collect()
    }

    /// Average relative prediction error of `m` over the set.
    pub fn d_avg(&self, m: &PortMapping3) -> Result<f64> {
        if m.num_ports() > MAX_SIM_PORTS {
            return Err(Error::PortCountExceeded {
                ports: m.num_ports(),
                max: MAX_SIM_PORTS,
            });
        }
        let compiled = self.compile(m)?;
        let mut items: Vec<(u32, u64)> = Vec::with_capacity(16);
        let mut err = 0.0;
        for (exp, measured) in &self.experiments {
            items.clear();
            for &(k, count) in exp {
                for &(mask, n) in &compiled[k] {
                    match items.iter_mut().find(|(m, _)| *m == mask) {
                        Some(slot) => slot.1 += count * n,
                        None => items.push((mask, count * n)),
                    }
                }
            }
            let predicted = bottleneck_masks(&items).throughput;
            err += (predicted - measured).abs() / measured;
        }
        Ok(err / self.experiments.len() as f64)
    }

    pub fn contains(&self, i: &InstructionId) -> bool {
        self.index.contains_key(i)
    }
}

/// A mapping with its cached objective values.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub mapping: PortMapping3,
    pub d_avg: f64,
    pub volume: u64,
}

impl Individual {
    pub fn evaluate(mapping: PortMapping3, train: &TrainingSet) -> Result<Self> {
        let d_avg = train.d_avg(&mapping)?;
        let volume = mapping.volume();
        Ok(Individual {
            mapping,
            d_avg,
            volume,
        })
    }

    /// Lexicographic order on `(d_avg, volume)`.
    pub fn objectives_cmp(&self, other: &Individual) -> Ordering {
        self.d_avg
            .total_cmp(&other.d_avg)
            .then(self.volume.cmp(&other.volume))
    }
}

#[derive(Clone, Debug)]
pub struct EvoConfig {
    pub population_size: usize,
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub convergence_epsilon: f64,
    pub hill_climb_budget: usize,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population_size: 1000,
            max_iterations: 200,
            rng_seed: 0,
            convergence_epsilon: 0.0,
            hill_climb_budget: 10_000,
        }
    }
}

impl EvoConfig {
    fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidConfig("population_size must be >= 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon < 0.0 {
            return Err(Error::InvalidConfig(
                "convergence_epsilon must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Samples a random mapping: per instruction 1..=|P| distinct µops, each
/// with multiplicity in `[1, ⌈tp(i)·|u|⌉]`.
pub fn init_random<R: Rng + ?Sized>(
    isa: &[InstructionId],
    singleton_tp: &BTreeMap<InstructionId, f64>,
    num_ports: usize,
    rng: &mut R,
) -> Result<PortMapping3> {
    if num_ports == 0 || num_ports > MAX_SIM_PORTS {
        return Err(Error::PortCountExceeded {
            ports: num_ports,
            max: MAX_SIM_PORTS,
        });
    }
    let subsets = (1usize << num_ports) - 1;
    let mut edges = Vec::new();
    for i in isa {
        let tp = *singleton_tp
            .get(i)
            .ok_or_else(|| Error::MissingThroughput(i.clone()))?;
        let k = rng.random_range(1..=num_ports);
        for idx in index::sample(rng, subsets, k) {
            let u = PortSet::from_mask(idx as u32 + 1).expect("index + 1 is non-zero");
            let upper = guarded_ceil(tp * u.width() as f64).max(1.0) as u32;
            let n = rng.random_range(1..=upper);
            edges.push((i.clone(), u, n));
        }
    }
    PortMapping3::from_edges(num_ports, edges)
}

/// Splits the pooled µop occurrences of both parents between two children,
/// instruction by instruction. A child left without µops for an instruction
/// receives one occurrence drawn from the pool.
pub fn recombine<R: Rng + ?Sized>(
    a: &PortMapping3,
    b: &PortMapping3,
    rng: &mut R,
) -> Result<(PortMapping3, PortMapping3)> {
    if a.num_ports() != b.num_ports() {
        return Err(Error::MismatchedConfig(format!(
            "{} vs {} ports",
            a.num_ports(),
            b.num_ports()
        )));
    }
    if !a.instructions().eq(b.instructions()) {
        return Err(Error::MismatchedConfig(
            "parents cover different instructions".into(),
        ));
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut pool: Vec<PortSet> = Vec::new();
    for i in a.instructions() {
        pool.clear();
        for parent in [a, b] {
            for (&u, &n) in parent.uops(i).expect("instruction sets are equal") {
                pool.extend(std::iter::repeat_n(u, n as usize));
            }
        }
        let (mut nl, mut nr) = (0usize, 0usize);
        for &u in &pool {
            if rng.random_bool(0.5) {
                left.push((i.clone(), u, 1));
                nl += 1;
            } else {
                right.push((i.clone(), u, 1));
                nr += 1;
            }
        }
        if nl == 0 {
            left.push((i.clone(), pool[rng.random_range(0..pool.len())], 1));
        }
        if nr == 0 {
            right.push((i.clone(), pool[rng.random_range(0..pool.len())], 1));
        }
    }
    Ok((
        PortMapping3::from_edges(a.num_ports(), left)?,
        PortMapping3::from_edges(a.num_ports(), right)?,
    ))
}

fn normalize(values: &[f64]) -> Vec<f64> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max <= min {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&v| OBJECTIVE_SCALE * (v - min) / (max - min))
        .collect()
}

/// `F = Λ1(D_avg) + Λ2(V)`, each Λ sending the population minimum to 0 and
/// maximum to 1000 (constant 0 when all values agree).
pub fn fitness_scalarize(pop: &[Individual]) -> Vec<f64> {
    let d: Vec<f64> = pop.iter().map(|x| x.d_avg).collect();
    let v: Vec<f64> = pop.iter().map(|x| x.volume as f64).collect();
    normalize(&d)
        .into_iter()
        .zip(normalize(&v))
        .map(|(a, b)| a + b)
        .collect()
}

/// Greedy hill-climb over edge multiplicities. Accepts a neighbour only if it
/// strictly improves `(d_avg, volume)` lexicographically; each tried
/// neighbour costs one evaluation of `budget`.
pub fn local_search(ind: Individual, train: &TrainingSet, budget: usize) -> Result<Individual> {
    let mut current = ind;
    let mut spent = 0usize;
    loop {
        let mut improved = false;
        let keys: Vec<(InstructionId, PortSet)> = current
            .mapping
            .edges()
            .map(|(i, u, _)| (i.clone(), u))
            .collect();
        for (i, u) in keys {
            let uops = match current.mapping.uops(&i) {
                Some(us) => us,
                None => continue,
            };
            let Some(&n) = uops.get(&u) else { continue };
            let mut candidates = Vec::with_capacity(2);
            if n > 1 || uops.len() > 1 {
                candidates.push(n - 1);
            }
            candidates.push(n + 1);
            for n2 in candidates {
                if spent >= budget {
                    return Ok(current);
                }
                spent += 1;
                let mapping = current.mapping.with_multiplicity(&i, u, n2)?;
                let cand = Individual::evaluate(mapping, train)?;
                if cand.objectives_cmp(&current) == Ordering::Less {
                    current = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            return Ok(current);
        }
    }
}

/// One line of the progress log.
#[derive(Clone, Debug, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    /// Objectives of the lowest `(d_avg, volume)` survivor.
    pub best_d_avg: f64,
    pub best_volume: u64,
    /// `max F − min F` over the survivors.
    pub spread: f64,
}

#[derive(Clone, Debug)]
pub struct EvolutionReport {
    /// `elite` after local search; the search result.
    pub best: Individual,
    /// Lowest `(d_avg, volume)` of the final population.
    pub elite: Individual,
    /// Lowest scalarized fitness of the final population.
    pub fittest: Individual,
    pub iterations: usize,
    pub children_generated: usize,
    pub converged: bool,
    /// Final population, sorted by fitness.
    pub population: Vec<Individual>,
}

/// Scores each mapping once; duplicates within the batch share a result.
fn evaluate_batch(mappings: Vec<PortMapping3>, train: &TrainingSet) -> Result<Vec<Individual>> {
    let mut cache: HashMap<&PortMapping3, usize> = HashMap::new();
    let mut unique: Vec<&PortMapping3> = Vec::new();
    let slots: Vec<usize> = mappings
        .iter()
        .map(|m| {
            *cache.entry(m).or_insert_with(|| {
                unique.push(m);
                unique.len() - 1
            })
        })
        .collect();
    let scores = unique
        .par_iter()
        .map(|m| train.d_avg(m))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mappings
        .iter()
        .zip(slots)
        .map(|(m, s)| Individual {
            mapping: m.clone(),
            d_avg: scores[s],
            volume: m.volume(),
        })
        .collect())
}

/// Keeps the `p` lowest-F individuals (ties: lower V, lower D_avg, earlier
/// position). The best `(D_avg, V)` individual always survives.
fn select(combined: Vec<Individual>, p: usize) -> (Vec<Individual>, f64) {
    let fitness = fitness_scalarize(&combined);
    let mut order: Vec<usize> = (0..combined.len()).collect();
    order.sort_by(|&x, &y| {
        fitness[x]
            .total_cmp(&fitness[y])
            .then(combined[x].volume.cmp(&combined[y].volume))
            .then(combined[x].d_avg.total_cmp(&combined[y].d_avg))
            .then(x.cmp(&y))
    });
    let elite = (0..combined.len())
        .min_by(|&x, &y| combined[x].objectives_cmp(&combined[y]).then(x.cmp(&y)))
        .expect("population is non-empty");
    order.truncate(p);
    if !order
        .iter()
        .any(|&k| combined[k].objectives_cmp(&combined[elite]) == Ordering::Equal)
    {
        *order.last_mut().expect("p >= 2") = elite;
    }
    let (lo, hi) = order
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| {
            (lo.min(fitness[k]), hi.max(fitness[k]))
        });
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    let survivors = order
        .into_iter()
        .map(|k| slots[k].take().expect("indices are distinct"))
        .collect();
    (survivors, hi - lo)
}

/// First individual with the lowest `(d_avg, volume)`.
fn most_accurate(population: &[Individual]) -> &Individual {
    population
        .iter()
        .reduce(|best, x| {
            if x.objectives_cmp(best) == Ordering::Less {
                x
            } else {
                best
            }
        })
        .expect("population is non-empty")
}

/// Runs the full search and reports every generation to `progress`.
pub fn run_evolution(
    train: &MeasurementSet,
    isa: &[InstructionId],
    num_ports: usize,
    cfg: &EvoConfig,
    progress: &mut dyn FnMut(&Progress),
) -> Result<EvolutionReport> {
    cfg.validate()?;
    if num_ports == 0 || num_ports > MAX_SIM_PORTS {
        return Err(Error::PortCountExceeded {
            ports: num_ports,
            max: MAX_SIM_PORTS,
        });
    }
    let compiled = TrainingSet::new(train, isa)?;
    let singleton_tp = train.singleton_throughputs();
    let mut isa: Vec<InstructionId> = isa.to_vec();
    isa.sort();
    isa.dedup();

    let p = cfg.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let initial = (0..p)
        .map(|_| init_random(&isa, &singleton_tp, num_ports, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let (mut population, _) = select(evaluate_batch(initial, &compiled)?, p);

    let mut iterations = 0;
    let mut children_generated = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations && !converged {
        let mut children = Vec::with_capacity(p + 1);
        while children.len() < p {
            let a = &population[rng.random_range(0..p)].mapping;
            let b = &population[rng.random_range(0..p)].mapping;
            let (c1, c2) = recombine(a, b, &mut rng)?;
            children.push(c1);
            children.push(c2);
        }
        children.truncate(p);
        children_generated += children.len();

        let mut combined = population;
        combined.extend(evaluate_batch(children, &compiled)?);
        let (survivors, spread) = select(combined, p);
        population = survivors;
        iterations += 1;
        converged = spread <= cfg.convergence_epsilon;

        let elite = most_accurate(&population);
        progress(&Progress {
            iteration: iterations,
            best_d_avg: elite.d_avg,
            best_volume: elite.volume,
            spread,
        });
    }

    let fittest = population[0].clone();
    let elite = most_accurate(&population).clone();
    let best = local_search(elite.clone(), &compiled, cfg.hill_climb_budget)?;
    Ok(EvolutionReport {
        best,
        elite,
        fittest,
        iterations,
        children_generated,
        converged,
        population,
    })
}

/// Infers a mapping for `isa` over `num_ports` ports from `train`.
pub fn evolve(
    train: &MeasurementSet,
    isa: &[InstructionId],
    num_ports: usize,
    cfg: &EvoConfig,
) -> Result<PortMapping3> {
    Ok(run_evolution(train, isa, num_ports, cfg, &mut |_| {})?
        .best
        .mapping)
}
