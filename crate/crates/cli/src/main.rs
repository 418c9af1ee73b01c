mod config;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spikesync::cumulant::eval_cumulant_density;
use spikesync::dendro::{count_dendrograms, enumerate_dendrograms, equivalence_classes};
use spikesync::harness::{
    fit_quadratic, meta_line, n_star_for_model, nstar_csv, power_csv, power_curve, power_svg,
    type_i_experiment, Axis, SearchConfig,
};
use spikesync::hawkes::{
    crit_rhs_hawkes, delta_phi_hawkes, delta_phi_hawkes_lb, n_min_hawkes, v0, var_gap_bounds,
    HawkesInput,
};
use spikesync::jitter::{
    check_sample_size, crit_rhs_jitter, delta_phi_jitter, n_min_jitter, noise_moments,
    v_indep_jitter, JitterInput,
};
use spikesync::perm::{permutation_test_with, TestConfig};
use spikesync::rng::Streams;
use spikesync::sim::{iid_sample, HawkesParams, JitterParams, Model, NoiseSpec};
use spikesync::{io as spike_io, Policy};

#[derive(Parser)]
#[command(
    name = "spikesync",
    version,
    about = "Permutation tests of dependence between spike trains"
)]
struct Cli {
    /// Worker threads (defaults to the number of cores); results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Flat key=value file; every key is a flag name and explicit flags take precedence.
    #[arg(long, global = true)]
    #[allow(dead_code)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate n i.i.d. trials and write them as trial,process,time CSV.
    Simulate(SimulateArgs),
    /// Run the permutation test on a spike-train CSV.
    Test(TestArgs),
    /// Closed-form moments and scaling bounds.
    #[command(subcommand)]
    Analytic(Analytic),
    /// Power curve over a grid of delta, n or M.
    Power(PowerArgs),
    /// Smallest n reaching power 1 - beta, for each network size M.
    Nstar(NstarArgs),
    /// Count and classify dendrograms on l leaves.
    Dendrograms(DendroArgs),
    /// Cumulant density of one neuron of the mean-field network.
    Cumulant(CumulantArgs),
    /// Rejection rate under a model satisfying independence.
    #[command(name = "typeI")]
    TypeI(TypeIArgs),
}

#[derive(Subcommand)]
enum Analytic {
    Jitter(AnalyticJitterArgs),
    Hawkes(AnalyticHawkesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Jitter,
    Hawkes,
    IndependentHawkes,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "jitter")]
    model: ModelKind,
    #[arg(long, default_value_t = 10.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 10.0)]
    lambda2: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// uniform:lo,hi | tridec:D | triinc:D
    #[arg(long, default_value = "uniform:-0.1,0.1")]
    noise: String,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 3.0)]
    a: f64,
    #[arg(long, default_value_t = 4.0)]
    b: f64,
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    /// Burn-in before time 0; should be much larger than 1/(b - a).
    #[arg(long, default_value_t = 10.0)]
    warmup: f64,
    #[arg(long = "T", default_value_t = 2.0)]
    t: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<Model> {
        Ok(match self.model {
            ModelKind::Jitter => Model::Jitter(JitterParams::new(
                self.lambda1,
                self.lambda2,
                self.eta,
                self.t,
                NoiseSpec::parse(&self.noise)?,
            )?),
            ModelKind::Hawkes => Model::Hawkes(self.hawkes()?),
            ModelKind::IndependentHawkes => Model::IndependentHawkes(self.hawkes()?),
        })
    }

    fn hawkes(&self) -> Result<HawkesParams> {
        Ok(HawkesParams::new(
            self.nu,
            self.a,
            self.b,
            self.m,
            self.t,
            self.warmup,
        )?)
    }

    fn meta(&self) -> Vec<(&'static str, String)> {
        match self.model {
            ModelKind::Jitter => vec![
                ("model", "jitter".into()),
                ("lambda1", self.lambda1.to_string()),
                ("lambda2", self.lambda2.to_string()),
                ("eta", self.eta.to_string()),
                ("noise", self.noise.clone()),
                ("T", self.t.to_string()),
            ],
            kind => vec![
                (
                    "model",
                    if matches!(kind, ModelKind::Hawkes) {
                        "hawkes"
                    } else {
                        "independent-hawkes"
                    }
                    .into(),
                ),
                ("nu", self.nu.to_string()),
                ("a", self.a.to_string()),
                ("b", self.b.to_string()),
                ("M", self.m.to_string()),
                ("warmup", self.warmup.to_string()),
                ("T", self.t.to_string()),
            ],
        }
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => {
                Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)
            }
            None => Box::new(io::stdout().lock()),
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "T")]
    t: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "B", default_value_t = 500)]
    n_perm: usize,
    #[arg(long)]
    seed: u64,
    /// Also write the permuted statistics as CSV.
    #[arg(long)]
    emit_null: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    /// Constant of the variance and criterion bounds.
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    /// Constant of the sample-size bound.
    #[arg(long = "C-prime", default_value_t = 1.0)]
    c_prime: f64,
}

#[derive(Args)]
struct AnalyticJitterArgs {
    #[arg(long, default_value_t = 10.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 10.0)]
    lambda2: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value = "uniform:-0.1,0.1")]
    noise: String,
    #[arg(long = "T", default_value_t = 2.0)]
    t: f64,
    /// One output row per value.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    delta: Vec<f64>,
    #[command(flatten)]
    bounds: BoundArgs,
}

#[derive(Args)]
struct AnalyticHawkesArgs {
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 3.0)]
    a: f64,
    #[arg(long, default_value_t = 4.0)]
    b: f64,
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    #[arg(long = "T", default_value_t = 2.0)]
    t: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    delta: Vec<f64>,
    #[command(flatten)]
    bounds: BoundArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long = "B", default_value_t = 500)]
    n_perm: usize,
    #[arg(long = "N-sim", default_value_t = 1000)]
    n_sim: usize,
    #[arg(long)]
    seed: u64,
    /// Use N_sim = 10000 and B = 5000.
    #[arg(long)]
    full_scale: bool,
}

impl ExperimentArgs {
    fn scaled(&self) -> (usize, usize) {
        if self.full_scale {
            (10_000, 5_000)
        } else {
            (self.n_sim, self.n_perm)
        }
    }

    fn test_config(&self) -> Result<TestConfig> {
        Ok(TestConfig::new(
            self.alpha,
            self.delta,
            self.scaled().1,
            self.seed,
        )?)
    }

    fn meta(&self) -> Vec<(&'static str, String)> {
        let (n_sim, b) = self.scaled();
        vec![
            ("alpha", self.alpha.to_string()),
            ("delta", self.delta.to_string()),
            ("B", b.to_string()),
            ("N_sim", n_sim.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// delta | n | M
    #[arg(long, default_value = "delta")]
    axis: String,
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[command(flatten)]
    out: OutArgs,
    /// Also draw the curve as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct NstarArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long = "Ms", value_delimiter = ',', default_value = "4,6,8")]
    ms: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    n_min: usize,
    #[arg(long, default_value_t = 5000)]
    n_max: usize,
    #[arg(long, default_value_t = 10)]
    step: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TypeIArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DendroArgs {
    #[arg(long)]
    l: usize,
    /// Write every dendrogram, one per line.
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Args)]
struct CumulantArgs {
    #[arg(long)]
    l: usize,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    times: Vec<f64>,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

fn timestamp() -> Option<u64> {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs())
}

fn meta(command: &str, mut fields: Vec<(&'static str, String)>) -> String {
    fields.insert(0, ("command", command.into()));
    meta_line(&fields, timestamp())
}

fn warn_all(msgs: impl IntoIterator<Item = String>) {
    for m in msgs {
        eprintln!("warning: {m}");
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let model = args.model.build()?;
    let sample = iid_sample(&model, args.n, &Streams::new(args.seed))?;
    let mut w = args.out.writer()?;
    let mut fields = args.model.meta();
    fields.extend([("n", args.n.to_string()), ("seed", args.seed.to_string())]);
    writeln!(w, "{}", meta("simulate", fields))?;
    spike_io::write_sample(&mut w, &sample)?;
    Ok(())
}

fn test(args: &TestArgs) -> Result<()> {
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let parsed = spike_io::read_sample(BufReader::new(file), args.t)?;
    warn_all(parsed.warnings);
    let cfg = TestConfig::new(args.alpha, args.delta, args.n_perm, args.seed)?;
    let r = permutation_test_with(
        &parsed.sample,
        &cfg,
        &Streams::new(cfg.seed),
        args.emit_null.is_some(),
    )?;
    println!("{},{},{},{}", r.statistic, r.quantile, r.p_value, r.reject);
    if let (Some(path), Some(null)) = (&args.emit_null, &r.permuted_statistics) {
        let mut w = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let fields = vec![
            ("input", args.input.display().to_string()),
            ("T", args.t.to_string()),
            ("delta", args.delta.to_string()),
            ("alpha", args.alpha.to_string()),
            ("B", args.n_perm.to_string()),
            ("seed", args.seed.to_string()),
        ];
        writeln!(w, "{}", meta("test", fields))?;
        writeln!(w, "k,statistic")?;
        for (k, s) in null.iter().enumerate() {
            writeln!(w, "{},{s}", k + 1)?;
        }
    }
    Ok(())
}

fn bound_meta(b: &BoundArgs) -> Vec<(&'static str, String)> {
    vec![
        ("n", b.n.to_string()),
        ("alpha", b.alpha.to_string()),
        ("beta", b.beta.to_string()),
        ("C", b.c.to_string()),
        ("C_prime", b.c_prime.to_string()),
    ]
}

fn scaling_note(b: &BoundArgs, columns: &str) -> String {
    format!(
        "# {columns} are scaling bounds with unnamed constants set to C={}, C'={}",
        b.c, b.c_prime
    )
}

fn analytic_jitter(args: &AnalyticJitterArgs) -> Result<()> {
    let noise = NoiseSpec::parse(&args.noise)?;
    let b = &args.bounds;
    let mut fields = vec![
        ("lambda1", args.lambda1.to_string()),
        ("lambda2", args.lambda2.to_string()),
        ("eta", args.eta.to_string()),
        ("noise", args.noise.clone()),
        ("T", args.t.to_string()),
    ];
    fields.extend(bound_meta(b));
    println!("{}", meta("analytic jitter", fields));
    println!("{}", scaling_note(b, "crit_rhs and n_min"));
    println!("delta,p,m1,delta_phi,v_indep,crit_rhs,n_min");
    warn_all(check_sample_size(b.n, b.alpha, b.beta)?);
    for &delta in &args.delta {
        let mut input =
            JitterInput::new(args.lambda1, args.lambda2, args.eta, delta, args.t, noise);
        input.c = b.c;
        input.c_prime = b.c_prime;
        warn_all(input.hypotheses());
        let nm = noise_moments(&noise, delta)?;
        println!(
            "{delta},{},{},{},{},{},{}",
            nm.p,
            nm.m1,
            delta_phi_jitter(&input)?,
            v_indep_jitter(&input)?,
            crit_rhs_jitter(&input, b.n, b.alpha, b.beta, Policy::Lenient)?,
            n_min_jitter(&input, b.alpha, b.beta)?
        );
    }
    Ok(())
}

fn hawkes_input(
    nu: f64,
    a: f64,
    b: f64,
    m: usize,
    delta: f64,
    t: f64,
    bounds: &BoundArgs,
) -> HawkesInput {
    let mut input = HawkesInput::new(nu, a, b, m, delta, t);
    input.c = bounds.c;
    input.c_prime = bounds.c_prime;
    input
}

fn analytic_hawkes(args: &AnalyticHawkesArgs) -> Result<()> {
    let b = &args.bounds;
    let mut fields = vec![
        ("nu", args.nu.to_string()),
        ("a", args.a.to_string()),
        ("b", args.b.to_string()),
        ("M", args.m.to_string()),
        ("T", args.t.to_string()),
    ];
    fields.extend(bound_meta(b));
    println!("{}", meta("analytic hawkes", fields));
    println!(
        "{}",
        scaling_note(b, "gap_indep, gap_obs, crit_rhs and n_min")
    );
    println!("delta,delta_phi,delta_phi_lb,v0,gap_indep,gap_obs,crit_rhs,n_min");
    warn_all(check_sample_size(b.n, b.alpha, b.beta)?);
    for &delta in &args.delta {
        let input = hawkes_input(args.nu, args.a, args.b, args.m, delta, args.t, b);
        input.validate()?;
        warn_all(input.hypotheses());
        let gaps = var_gap_bounds(&input)?;
        println!(
            "{delta},{},{},{},{},{},{},{}",
            delta_phi_hawkes(&input)?,
            delta_phi_hawkes_lb(&input, Policy::Lenient)?,
            v0(args.nu, input.ell(), delta, args.t)?,
            gaps.gap_indep,
            gaps.gap_obs,
            crit_rhs_hawkes(&input, b.n, b.alpha, b.beta, Policy::Lenient)?,
            n_min_hawkes(&input, b.alpha, b.beta, Policy::Lenient)?
        );
    }
    Ok(())
}

fn power(args: &PowerArgs) -> Result<()> {
    let model = args.model.build()?;
    let axis: Axis = args.axis.parse()?;
    let cfg = args.exp.test_config()?;
    let (n_sim, _) = args.exp.scaled();
    let points = power_curve(
        &model,
        &cfg,
        axis,
        &args.grid,
        args.n,
        n_sim,
        &Streams::new(cfg.seed),
    )?;
    let mut fields = args.model.meta();
    fields.extend(args.exp.meta());
    fields.extend([("n", args.n.to_string()), ("axis", axis.name().into())]);
    let grid: Vec<String> = args.grid.iter().map(f64::to_string).collect();
    fields.push(("grid", grid.join(",")));
    let mut w = args.out.writer()?;
    writeln!(w, "{}", meta("power", fields))?;
    write!(w, "{}", power_csv(&points))?;
    if let Some(path) = &args.svg {
        std::fs::write(
            path,
            power_svg(&points, &format!("power against {}", axis.name())),
        )
        .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn nstar(args: &NstarArgs) -> Result<()> {
    if !matches!(args.model.model, ModelKind::Hawkes) {
        bail!("nstar searches over network sizes and needs --model hawkes");
    }
    let cfg = args.exp.test_config()?;
    let (n_sim, _) = args.exp.scaled();
    let search = SearchConfig {
        n_min: args.n_min,
        n_max: args.n_max,
        step: args.step,
    };
    let root = Streams::new(cfg.seed);
    let mut rows = Vec::with_capacity(args.ms.len());
    for &m in &args.ms {
        let mut margs = args.model.clone();
        margs.m = m;
        let input = HawkesInput::new(margs.nu, margs.a, margs.b, m, cfg.delta, margs.t);
        let violated = input.hypotheses();
        if !violated.is_empty() {
            bail!("M = {m}: {}", violated.join("; "));
        }
        let r = n_star_for_model(
            &margs.build()?,
            &cfg,
            args.beta,
            search,
            n_sim,
            &root.child(&[m as u64]),
        )?;
        rows.push((m, r));
    }
    let mut fields = args.model.meta();
    fields.retain(|(k, _)| *k != "M");
    fields.extend(args.exp.meta());
    let ms: Vec<String> = args.ms.iter().map(usize::to_string).collect();
    fields.extend([
        ("Ms", ms.join(",")),
        ("beta", args.beta.to_string()),
        ("n_min", args.n_min.to_string()),
        ("n_max", args.n_max.to_string()),
        ("step", args.step.to_string()),
    ]);
    let mut w = args.out.writer()?;
    writeln!(w, "{}", meta("nstar", fields))?;
    write!(w, "{}", nstar_csv(&rows))?;
    if rows.len() >= 2 {
        let ms: Vec<f64> = rows.iter().map(|(m, _)| *m as f64).collect();
        let ns: Vec<f64> = rows.iter().map(|(_, r)| r.n_star as f64).collect();
        match fit_quadratic(&ms, &ns) {
            Ok(f) => writeln!(w, "#fit n_star = c0 + c1*M^2 c0={} c1={}", f.c0, f.c1)?,
            Err(e) => eprintln!("warning: no quadratic fit: {e}"),
        }
    }
    Ok(())
}

fn type_i(args: &TypeIArgs) -> Result<()> {
    let model = args.model.build()?;
    match &model {
        Model::Jitter(p) if p.eta != 0.0 => bail!("typeI needs an independent model: use --eta 0"),
        Model::Hawkes(_) => {
            bail!("typeI needs an independent model: use --model independent-hawkes")
        }
        _ => {}
    }
    let cfg = args.exp.test_config()?;
    let (n_sim, _) = args.exp.scaled();
    let point = type_i_experiment(&model, &cfg, args.n, n_sim, &Streams::new(cfg.seed))?;
    let mut fields = args.model.meta();
    fields.extend(args.exp.meta());
    fields.push(("n", args.n.to_string()));
    let mut w = args.out.writer()?;
    writeln!(w, "{}", meta("typeI", fields))?;
    write!(w, "{}", power_csv(&[point]))?;
    Ok(())
}

fn dendrograms(args: &DendroArgs) -> Result<()> {
    if !(2..=5).contains(&args.l) {
        bail!("--l must lie in 2..=5, got {}", args.l);
    }
    let classes = equivalence_classes(args.l)?;
    println!(
        "l={} dendrograms={} classes={}",
        args.l,
        count_dendrograms(args.l)?,
        classes.len()
    );
    println!("shape,multiplicity,representative");
    for c in &classes {
        println!(
            "\"{}\",{},\"{}\"",
            c.shape, c.multiplicity, c.representative
        );
    }
    if let Some(path) = &args.emit {
        let mut w = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        for d in enumerate_dendrograms(args.l)? {
            writeln!(w, "{d}")?;
        }
    }
    Ok(())
}

fn cumulant(args: &CumulantArgs) -> Result<()> {
    if args.times.len() != args.l {
        bail!(
            "--times has {} entries but --l is {}",
            args.times.len(),
            args.l
        );
    }
    println!(
        "{}",
        eval_cumulant_density(args.l, &args.times, args.mu, args.a, args.b, args.tol)?
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Test(a) => test(a),
        Command::Analytic(Analytic::Jitter(a)) => analytic_jitter(a),
        Command::Analytic(Analytic::Hawkes(a)) => analytic_hawkes(a),
        Command::Power(a) => power(a),
        Command::Nstar(a) => nstar(a),
        Command::Dendrograms(a) => dendrograms(a),
        Command::Cumulant(a) => cumulant(a),
        Command::TypeI(a) => type_i(a),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse_from(config::merge(std::env::args().collect())?);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!("--workers must be positive");
        }
        pool = pool.num_threads(w);
    }
    pool.build()?.install(|| run(&cli))
}
