use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use dcpviz_api::ApiConfig;
use dcpviz_core::analytics::{write_anomaly_csv, AnomalyRow, RetroWindow};
use dcpviz_core::contour::BandSpec;
use dcpviz_core::grid::{Scenario, Variable};
use dcpviz_core::index::DataIndex;
use dcpviz_core::store::{ProductKey, ProductKind, Query, Store};
use dcpviz_core::views::{load_series, SeriesKey};
use dcpviz_core::workflow::{fixtures, ArchiveSpec, DataSite, SiteManifest, WorkflowQuery, DEFAULT_DATASET};

const DEFAULT_STORE: &str = "dcpviz-store";

#[derive(Parser)]
#[command(name = "dcpviz", version, about = "Downscaled climate projection explorer")]
struct Cli {
    /// Product store directory.
    #[arg(long, env = "DCPVIZ_STORE", global = true)]
    store: Option<PathBuf>,
    /// Optional TOML config; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic NetCDF archive.
    GenArchive {
        /// TOML/JSON archive spec, or a fixture name (standard, five-year, century, explorer).
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record a data site (a directory of raw files) with the store.
    RegisterSite {
        #[arg(long)]
        id: String,
        #[arg(long)]
        root: PathBuf,
        /// Region mask file; a synthetic NCA mask is used otherwise.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Run the workflow at a registered site and print the transfer report.
    Run(RunArgs),
    /// Inspect stored products.
    Store {
        #[command(subcommand)]
        cmd: StoreCmd,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<SocketAddr>,
        /// Directory of static UI assets served under `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        cors: bool,
    },
    /// Write regional anomaly CSVs from stored aggregates.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    site: String,
    #[arg(long)]
    model: String,
    #[arg(long, value_delimiter = ',', required = true)]
    variables: Vec<Variable>,
    #[arg(long)]
    scenario: Scenario,
    /// Inclusive `start:end`.
    #[arg(long, value_parser = parse_years)]
    years: (i32, i32),
    /// Baseline window `start:end` for relative intensity.
    #[arg(long, value_parser = parse_years)]
    retro: Option<(i32, i32)>,
    /// Comma-separated band thresholds.
    #[arg(long, allow_hyphen_values = true)]
    bands: Option<String>,
    #[arg(long, default_value = DEFAULT_DATASET)]
    dataset: String,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum StoreCmd {
    /// One line per stored product: kind, scenario, index, bytes.
    Ls {
        #[arg(long)]
        kind: Option<ProductKind>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        variable: Option<Variable>,
        #[arg(long)]
        scenario: Option<Scenario>,
        #[arg(long, value_parser = parse_years)]
        years: Option<(i32, i32)>,
        #[arg(long)]
        json: bool,
    },
    /// Write one product's bytes to stdout or a file.
    Get {
        index: String,
        #[arg(long, default_value = "geojson")]
        kind: ProductKind,
        #[arg(long)]
        scenario: Option<Scenario>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    variable: Variable,
    #[arg(long)]
    scenario: Scenario,
    #[arg(long, value_parser = parse_years, default_value = "1985:2005")]
    retro: (i32, i32),
    /// Rows to write; the scenario's own years by default.
    #[arg(long, value_parser = parse_years)]
    years: Option<(i32, i32)>,
    /// Region id or name; all regions by default.
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    store: Option<PathBuf>,
    #[serde(default)]
    serve: ServeConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServeConfig {
    bind: Option<SocketAddr>,
    static_dir: Option<PathBuf>,
    cors: Option<bool>,
    default_page: Option<usize>,
    max_page: Option<usize>,
}

fn parse_years(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected start:end, got `{s}`"))?;
    let a: i32 = a.trim().parse().map_err(|e| format!("start year: {e}"))?;
    let b: i32 = b.trim().parse().map_err(|e| format!("end year: {e}"))?;
    if a > b {
        return Err(format!("{a}:{b} is reversed"));
    }
    Ok((a, b))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn load_spec(spec: &str) -> Result<ArchiveSpec> {
    if let Some(s) = fixtures::by_name(spec) {
        return Ok(s);
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading spec {spec}"))?;
    if spec.ends_with(".json") {
        serde_json::from_str(&text).with_context(|| format!("parsing spec {spec}"))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing spec {spec}"))
    }
}

fn sites_dir(store: &Path) -> PathBuf {
    store.join("sites")
}

fn load_site(store: &Path, id: &str) -> Result<DataSite> {
    let path = sites_dir(store).join(format!("{id}.toml"));
    let text = fs::read_to_string(&path).with_context(|| format!("site `{id}` is not registered"))?;
    let manifest: SiteManifest = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(DataSite::from_manifest(&manifest)?)
}

fn first_source(store: &Store, dataset: Option<String>, model: Option<String>) -> Result<(String, String)> {
    let refs = store.query(&Query {
        dataset: dataset.clone(),
        model: model.clone(),
        ..Query::default()
    });
    let first = refs
        .iter()
        .map(|r| (r.index.dataset.clone(), r.index.model.clone()))
        .min()
        .ok_or_else(|| anyhow!("no stored products match"))?;
    Ok((dataset.unwrap_or(first.0), model.unwrap_or(first.1)))
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = load_config(cli.config.as_deref())?;
    let store_path = cli.store.or(config.store).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE));
    match cli.cmd {
        Cmd::GenArchive { spec, out } => {
            let spec = load_spec(&spec)?;
            for path in spec.write_to(&out)? {
                println!("{}", path.display());
            }
        }
        Cmd::RegisterSite { id, root, mask } => {
            let root = fs::canonicalize(&root).with_context(|| format!("archive root {}", root.display()))?;
            let manifest = SiteManifest {
                site_id: id.clone(),
                archive_root: root,
                mask: mask.map(|m| fs::canonicalize(&m).with_context(|| format!("mask {}", m.display()))).transpose()?,
            };
            let site = DataSite::from_manifest(&manifest)?;
            for (file, why) in site.rejected() {
                eprintln!("warning: rejected {file}: {why}");
            }
            let dir = sites_dir(&store_path);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(format!("{id}.toml"));
            fs::write(&path, toml::to_string(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
            println!("site {id}: {} holdings", site.holdings().len());
        }
        Cmd::Run(a) => {
            let site = load_site(&store_path, &a.site)?;
            let store = Store::open(&store_path)?;
            let mut q = WorkflowQuery::new(a.model, a.variables, a.scenario, a.years);
            q.dataset = a.dataset;
            q.retro = a.retro.map(|(t0, t1)| RetroWindow::new(t0, t1)).transpose()?;
            q.bands = a.bands.as_deref().map(BandSpec::parse).transpose()?;
            let plan = site.plan(&q)?;
            let kinds = ["extract", "baseline_extract", "aggregate_month", "contour"];
            let counts: Vec<String> = kinds.iter().map(|k| format!("{k}={}", plan.count(k))).collect();
            eprintln!("plan: {} files, {}", plan.files().len(), counts.join(" "));
            let report = site.execute(&plan, &store)?;
            if a.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{}", report.summary());
            }
            if !report.failures.is_empty() {
                bail!("{} task(s) failed", report.failures.len());
            }
        }
        Cmd::Store { cmd } => {
            let store = Store::open(&store_path)?;
            match cmd {
                StoreCmd::Ls {
                    kind,
                    dataset,
                    model,
                    variable,
                    scenario,
                    years,
                    json,
                } => {
                    let q = Query {
                        dataset,
                        model,
                        variable: variable.map(|v| v.as_str().to_string()),
                        scenario,
                        years,
                        months: None,
                        kind,
                    };
                    let mut stdout = std::io::stdout().lock();
                    for r in store.records().into_iter().filter(|r| q.matches(r)) {
                        if json {
                            writeln!(stdout, "{}", serde_json::to_string(&r)?)?;
                        } else {
                            writeln!(stdout, "{}\t{}\t{}\t{}", r.kind.as_str(), r.scenario, r.index, r.bytes)?;
                        }
                    }
                }
                StoreCmd::Get {
                    index,
                    kind,
                    scenario,
                    out,
                } => {
                    let idx: DataIndex = index.parse()?;
                    let scenario = match scenario {
                        Some(s) => s,
                        None => match store.scenarios_of(&idx)[..] {
                            [] => bail!("no stored product {idx}"),
                            [s] => s,
                            ref many => {
                                let names: Vec<&str> = many.iter().map(|s| s.as_str()).collect();
                                bail!("{idx} is stored under {}; pass --scenario", names.join(", "))
                            }
                        },
                    };
                    let bytes = store.get(&ProductKey::new(idx, scenario, kind))?;
                    write_out(out.as_deref(), &bytes)?;
                }
            }
        }
        Cmd::Serve { bind, static_dir, cors } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let d = ApiConfig::default();
            let s = config.serve;
            let api = ApiConfig {
                bind: bind.or(s.bind).unwrap_or(d.bind),
                store: store_path,
                static_dir: static_dir.or(s.static_dir),
                cors: cors || s.cors.unwrap_or(false),
                default_page: s.default_page.unwrap_or(d.default_page),
                max_page: s.max_page.unwrap_or(d.max_page),
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(dcpviz_api::serve(api))?;
        }
        Cmd::Export(a) => {
            let store = Store::open(&store_path)?;
            let (dataset, model) = first_source(&store, a.dataset, a.model)?;
            let window = RetroWindow::new(a.retro.0, a.retro.1)?;
            let years = match a.years {
                Some((s, e)) => s..=e,
                None => dcpviz_core::views::native_years(a.scenario),
            };
            let series = load_series(
                &store,
                &SeriesKey {
                    dataset,
                    model,
                    variable: a.variable,
                    scenario: a.scenario,
                },
            )?;
            let region = match &a.region {
                None => None,
                Some(key) => {
                    let mask = store.load_mask()?.ok_or_else(|| anyhow!("store has no region mask"))?;
                    Some(mask.resolve(key).ok_or_else(|| anyhow!("unknown region `{key}`"))?)
                }
            };
            let rows: Vec<AnomalyRow> = series
                .values()
                .filter(|s| region.is_none_or(|r| r == s.region_id))
                .flat_map(|s| AnomalyRow::from_series(s, window, years.clone()))
                .collect();
            let mut buf = Vec::new();
            write_anomaly_csv(&mut buf, &rows)?;
            write_out(a.out.as_deref(), &buf)?;
            eprintln!("{} rows", rows.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        // The reader went away, as with `dcpviz store ls | head`.
        Err(e)
            if e.chain()
                .filter_map(|c| c.downcast_ref::<std::io::Error>())
                .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
