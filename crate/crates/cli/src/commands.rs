use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use hmp_core::cascade::monte_carlo_f_star;
use hmp_core::coverage::{greedy, SampleStore, SampleStoreBuilder};
use hmp_core::graph::generate::scale_free;
use hmp_core::graph::{
    load_edge_list, select_misinfo_seeds, write_edge_list, InfluenceRanking, ProbabilityModel, SeedRole,
};
use hmp_core::hmp::{hmp, HmpConfig};
use hmp_core::oracle::{exact_expected_x, exact_f_star, exact_opt, ratio_to_f64};
use hmp_core::rng::{stream_rng, Purpose};
use hmp_core::sampler::dump::{read_dump, write_dump, DumpHeader};
use hmp_core::sampler::{hybrid_batch, uniform_batch, Sampler, SeedRoots};
use hmp_core::{Error, Graph, NodeId, SeedSet};
use sha2::{Digest, Sha256};

use crate::manifest::{join, Manifest};
use crate::{
    BenchmarkConfig, CliError, CoverConfig, EvaluateConfig, GenerateConfig, InstanceArgs, Method,
    OracleConfig, Result, RunConfig, SampleConfig, SeedSource,
};

pub const CSV_HEADER: &str =
    "method,samples,sampling_seconds,greedy_seconds,f_star_mean,f_star_stderr,empty_sample_fraction";

fn file_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(file_error(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(file_error(path))
}

fn load_graph(path: &Path, model: ProbabilityModel) -> Result<Graph> {
    Ok(load_edge_list(open(path)?, model)?)
}

/// SHA-256 of the graph in canonical edge-list form (labels and
/// probabilities), as lowercase hex.
pub fn graph_hash(graph: &Graph) -> String {
    let mut text = Vec::new();
    write_edge_list(graph, &mut text).expect("writing to memory cannot fail");
    Sha256::digest(&text).iter().map(|b| format!("{b:02x}")).collect()
}

fn labels_of(graph: &Graph, nodes: &[NodeId]) -> String {
    join(nodes.iter().map(|&v| graph.label(v)))
}

fn resolve_labels(graph: &Graph, labels: &[u64], role: SeedRole) -> Result<SeedSet> {
    let nodes = labels
        .iter()
        .map(|&label| {
            graph
                .node_by_label(label)
                .ok_or_else(|| Error::Domain(format!("seed node {label} does not appear in the graph")))
        })
        .collect::<hmp_core::Result<Vec<_>>>()?;
    Ok(SeedSet::new(nodes, role, graph.node_count())?)
}

fn read_label_file(path: &Path) -> Result<Vec<u64>> {
    let mut labels = Vec::new();
    for (index, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(file_error(path))?;
        let text = line.split('#').next().unwrap_or("");
        for field in text.split_whitespace() {
            let label = field.parse().map_err(|_| Error::Parse {
                line: index + 1,
                message: format!("{}: invalid node label `{field}`", path.display()),
            })?;
            labels.push(label);
        }
    }
    Ok(labels)
}

fn seeds_from(source: &SeedSource, graph: &Graph, role: SeedRole, seed: u64) -> Result<SeedSet> {
    match source {
        SeedSource::Auto(count) => match role {
            SeedRole::Misinformation => {
                Ok(select_misinfo_seeds(graph, *count, &InfluenceRanking::default(), seed)?)
            }
            SeedRole::Positive => Err(Error::Domain("positive seeds cannot be `auto`".into()).into()),
        },
        SeedSource::List(labels) => resolve_labels(graph, labels, role),
        SeedSource::File(path) => resolve_labels(graph, &read_label_file(path)?, role),
    }
}

struct Instance {
    graph: Graph,
    misinfo: SeedSet,
}

impl Instance {
    fn load(args: &InstanceArgs) -> Result<Instance> {
        let graph = load_graph(&args.graph, args.prob)?;
        let misinfo = seeds_from(&args.misinfo_seeds, &graph, SeedRole::Misinformation, args.seed)?;
        if misinfo.is_empty() {
            return Err(Error::Domain("the misinformation seed set is empty".into()).into());
        }
        Ok(Instance { graph, misinfo })
    }
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start {workers} workers: {e}")))?;
    pool.install(job)
}

fn emit(path: Option<&PathBuf>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(path) => {
            let mut file = create(path)?;
            file.write_all(text.as_bytes())
                .and_then(|_| file.flush())
                .map_err(file_error(path))
        }
        None => out.write_all(text.as_bytes()).map_err(|e| Error::Io(e).into()),
    }
}

fn seconds(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64())
}

pub fn run_hmp(config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let args = &config.instance;
    let (instance, outcome) = with_workers(args.workers, || {
        let instance = Instance::load(args)?;
        let n = instance.graph.node_count();
        let settings = HmpConfig {
            k: config.k,
            epsilon: config.epsilon,
            big_n: config.big_n.unwrap_or((n as f64).max(4.0)),
            seed: args.seed,
            sample_budget: config.sample_budget,
            fallback_on_degenerate: config.fallback,
            seed_roots: if config.strict_seed_roots { SeedRoots::Include } else { SeedRoots::Skip },
        };
        let outcome = hmp(&instance.graph, &instance.misinfo, &settings)?;
        Ok((instance, outcome))
    })?;
    let graph = &instance.graph;
    let p = &outcome.params;
    let d = &outcome.diagnostics;
    let mut m = Manifest::new();
    m.push("graph", args.graph.display())
        .push("graph_hash", graph_hash(graph))
        .push("nodes", graph.node_count())
        .push("edges", graph.edge_count())
        .push("prob", args.prob)
        .push("misinfo_seeds", labels_of(graph, instance.misinfo.nodes()))
        .push("k", p.k)
        .push("epsilon", p.epsilon)
        .push("big_n", p.big_n)
        .push("seed", args.seed)
        .push("epsilon0", p.epsilon0)
        .push("eps11", p.eps11)
        .push("eps12", p.eps12)
        .push("l1", p.l1)
        .push("l2", p.l2)
        .push("lower_bound_seeds", labels_of(graph, &d.lower_bound_seeds))
        .push("lower_bound_samples", d.lower_bound_samples)
        .push("opt_lower", p.opt_lower)
        .push("fallback", d.fallback_used)
        .push("l", p.l)
        .push("edges_examined", d.edges_examined)
        .push("covered_sets", outcome.selection.covered_sets)
        .push("marginal_gains", join(&outcome.selection.marginal_gains))
        .push("padded", outcome.selection.padded)
        .push("seeds", labels_of(graph, &outcome.seeds));
    if !config.no_timings {
        let t = &d.timings;
        m.push("seconds_lower_bound", seconds(t.lower_bound))
            .push("seconds_parameters", seconds(t.parameters))
            .push("seconds_sampling", seconds(t.sampling))
            .push("seconds_greedy", seconds(t.greedy));
    }
    emit(config.out.as_ref(), &m.to_string(), out)?;
    if config.out.is_some() {
        for &v in &outcome.seeds {
            writeln!(out, "{}", graph.label(v)).map_err(Error::Io)?;
        }
    }
    Ok(())
}

struct Row {
    method: &'static str,
    samples: usize,
    sampling: Duration,
    greedy: Duration,
    mean: f64,
    stderr: f64,
    empty_fraction: f64,
}

pub fn benchmark(config: &BenchmarkConfig, out: &mut dyn Write) -> Result<()> {
    let counts = &config.samples;
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Domain("sample counts must be positive".into()).into());
    }
    if counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("sample counts must be ascending".into()).into());
    }
    let methods: &[Method] = match config.method {
        Method::Both => &[Method::Hybrid, Method::Uniform],
        Method::Hybrid => &[Method::Hybrid],
        Method::Uniform => &[Method::Uniform],
    };
    let args = &config.instance;
    let rows = with_workers(args.workers, || {
        let instance = Instance::load(args)?;
        let graph = &instance.graph;
        let sampler = Sampler::new(graph, &instance.misinfo);
        let mut rows = Vec::new();
        for &method in methods {
            for &count in counts {
                let start = Instant::now();
                let mut builder = SampleStoreBuilder::new(graph.node_count());
                let (name, empty, total) = match method {
                    Method::Uniform => {
                        let batch = uniform_batch(&sampler, count, args.seed);
                        for s in &batch.samples {
                            builder.push_uniform(s);
                        }
                        let empty = batch.samples.iter().filter(|s| s.is_empty()).count();
                        ("uniform", empty, count)
                    }
                    _ => {
                        let batch = hybrid_batch(&sampler, count, args.seed, Purpose::Framework)?;
                        for s in &batch.samples {
                            builder.push_rsample(s);
                        }
                        let sets = batch.samples.iter().flat_map(|s| &s.sets);
                        let (empty, total) =
                            sets.fold((0, 0), |(e, t), set| (e + set.is_empty() as usize, t + 1));
                        ("hybrid", empty, total)
                    }
                };
                let store = builder.build();
                let sampling = start.elapsed();
                let start = Instant::now();
                let selection = greedy(&store, config.k)?;
                let greedy_time = start.elapsed();
                let estimate = monte_carlo_f_star(
                    graph,
                    instance.misinfo.nodes(),
                    &selection.seeds,
                    config.sims,
                    args.seed,
                )?;
                rows.push(Row {
                    method: name,
                    samples: count,
                    sampling,
                    greedy: greedy_time,
                    mean: estimate.mean,
                    stderr: estimate.std_error,
                    empty_fraction: if total == 0 { 0.0 } else { empty as f64 / total as f64 },
                });
            }
        }
        Ok(rows)
    })?;
    let mut csv = format!("{CSV_HEADER}\n");
    for row in rows {
        let (sampling, greedy) = if config.no_timings {
            (Duration::ZERO, Duration::ZERO)
        } else {
            (row.sampling, row.greedy)
        };
        csv.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6}\n",
            row.method,
            row.samples,
            seconds(sampling),
            seconds(greedy),
            row.mean,
            row.stderr,
            row.empty_fraction
        ));
    }
    emit(config.out.as_ref(), &csv, out)
}

pub fn evaluate(config: &EvaluateConfig, out: &mut dyn Write) -> Result<()> {
    let args = &config.instance;
    let (instance, positive, estimate) = with_workers(args.workers, || {
        let instance = Instance::load(args)?;
        let positive = seeds_from(&config.positive, &instance.graph, SeedRole::Positive, args.seed)?;
        let estimate = monte_carlo_f_star(
            &instance.graph,
            instance.misinfo.nodes(),
            positive.nodes(),
            config.sims,
            args.seed,
        )?;
        Ok((instance, positive, estimate))
    })?;
    let mut m = Manifest::new();
    m.push("misinfo_seeds", labels_of(&instance.graph, instance.misinfo.nodes()))
        .push("positive_seeds", labels_of(&instance.graph, positive.nodes()))
        .push("simulations", estimate.samples)
        .push("f_star_mean", format!("{:.6}", estimate.mean))
        .push("f_star_stderr", format!("{:.6}", estimate.std_error));
    emit(None, &m.to_string(), out)
}

pub fn oracle(config: &OracleConfig, out: &mut dyn Write) -> Result<()> {
    let args = &config.instance;
    let m = with_workers(args.workers, || {
        let Instance { graph, misinfo } = Instance::load(args)?;
        let mut m = Manifest::new();
        m.push("misinfo_seeds", labels_of(&graph, misinfo.nodes()));
        if let Some(k) = config.opt {
            let opt = exact_opt(&graph, &misinfo, k)?;
            m.push("opt_seeds", labels_of(&graph, &opt.seeds))
                .push("opt_value", &opt.value)
                .push("opt_value_float", ratio_to_f64(&opt.value));
        } else {
            let source = config.positive.as_ref().expect("clap requires --positive or --opt");
            let positive = seeds_from(source, &graph, SeedRole::Positive, args.seed)?;
            let f = exact_f_star(&graph, &misinfo, positive.nodes())?;
            let x = exact_expected_x(&graph, &misinfo, positive.nodes())?;
            m.push("positive_seeds", labels_of(&graph, positive.nodes()))
                .push("f_star", &f.value)
                .push("f_star_float", f.to_f64())
                .push("expected_x", &x.value);
        }
        Ok(m)
    })?;
    emit(None, &m.to_string(), out)
}

pub fn sample(config: &SampleConfig, out: &mut dyn Write) -> Result<()> {
    let args = &config.instance;
    let (hash, samples) = with_workers(args.workers, || {
        let instance = Instance::load(args)?;
        let sampler = Sampler::new(&instance.graph, &instance.misinfo);
        let batch = hybrid_batch(&sampler, config.samples, args.seed, Purpose::Dump)?;
        Ok((graph_hash(&instance.graph), batch.samples))
    })?;
    let header = DumpHeader {
        graph_hash: hash,
        seed: args.seed,
        samples: samples.len(),
    };
    let mut file = create(&config.out)?;
    write_dump(&mut file, &header, &samples)?;
    file.flush().map_err(file_error(&config.out))?;
    let mut m = Manifest::new();
    m.push("samples", samples.len())
        .push("sets", samples.iter().map(|s| s.sets.len()).sum::<usize>())
        .push("dump", config.out.display());
    emit(None, &m.to_string(), out)
}

pub fn cover(config: &CoverConfig, out: &mut dyn Write) -> Result<()> {
    let graph = load_graph(&config.graph, config.prob)?;
    let (header, samples) = read_dump(open(&config.dump)?)?;
    let hash = graph_hash(&graph);
    if header.graph_hash != hash {
        return Err(Error::Domain(format!(
            "{} was sampled from a different graph (hash {}, expected {hash})",
            config.dump.display(),
            header.graph_hash
        ))
        .into());
    }
    let n = graph.node_count();
    if let Some(v) = samples.iter().flat_map(|s| s.sets.iter().flatten()).find(|&&v| v as usize >= n) {
        return Err(Error::Domain(format!("dump mentions node {v} beyond the graph's {n} nodes")).into());
    }
    let store = SampleStore::from_rsamples(n, &samples);
    let selection = greedy(&store, config.k)?;
    let mut m = Manifest::new();
    m.push("samples", store.sample_count())
        .push("covered_sets", selection.covered_sets)
        .push("estimate", store.mean_coverage(&selection.seeds)?)
        .push("padded", selection.padded)
        .push("seeds", labels_of(&graph, &selection.seeds));
    emit(None, &m.to_string(), out)
}

pub fn generate(config: &GenerateConfig, out: &mut dyn Write) -> Result<()> {
    let mut rng = stream_rng(config.seed, Purpose::Generation, 0);
    let graph = scale_free(config.nodes, config.attach, &mut rng)?;
    let mut file = create(&config.out)?;
    let path = &config.out;
    for e in 0..graph.edge_count() as u32 {
        let (u, v) = graph.endpoints(e);
        writeln!(file, "{u} {v}").map_err(file_error(path))?;
    }
    file.flush().map_err(file_error(path))?;
    let mut m = Manifest::new();
    m.push("nodes", graph.node_count()).push("edges", graph.edge_count());
    emit(None, &m.to_string(), out)
}
