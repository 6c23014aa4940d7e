use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use stsdep::bitseq::{read_sequence, write_ascii, write_bin, BitSequence};
use stsdep::depscope::{
    histogram, q_stat, scrambled_q, sd_scaling_report, write_scaling_csv, ActiveSet, QMode,
};
use stsdep::genrand::{make_sequence_set, Block128, GeneratorSpec};
use stsdep::minset::{greedy_run, overlap_stats, GreedyConfig, GreedyTrajectory, StopRule};
use stsdep::pmatrix::{
    compute_generated_to_file, compute_matrix, compute_rows, load_matrix, save_matrix,
    MatrixSource, PValueMatrix,
};
use stsdep::sts162::{item_ids, BatteryParams};

use crate::error::CliError;
use crate::{
    AnalyzeCmd, GenCmd, GenKind, GeneratorArgs, MinsetCmd, ModeChoice, OverlapCmd, ParamOverrides,
    ReportCmd, ReportFormat, RunCmd, SeqFormat, StopKind,
};

fn generator_spec(g: &GeneratorArgs) -> Result<GeneratorSpec, CliError> {
    match g.kind {
        GenKind::Mt19937 => {
            if g.key.is_some() || g.counter0.is_some() {
                return Err(CliError::Usage("--key/--counter0 apply only to aes128-ctr".into()));
            }
            Ok(GeneratorSpec::Mt19937 { seed: g.seed })
        }
        GenKind::Aes128Ctr => {
            let key: Block128 = g
                .key
                .as_deref()
                .ok_or_else(|| CliError::Usage("aes128-ctr needs --key".into()))?
                .parse()?;
            let counter0 = match &g.counter0 {
                Some(c) => c.parse()?,
                None => Block128::default(),
            };
            Ok(GeneratorSpec::Aes128Ctr { key, counter0 })
        }
    }
}

fn comment_block(config: &Value) -> String {
    format!("stsdep {} {}", env!("CARGO_PKG_VERSION"), config)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn gen(c: &GenCmd) -> Result<(), CliError> {
    if c.n == 0 || c.m == 0 {
        return Err(CliError::Usage("--n and --m must be at least 1".into()));
    }
    let spec = generator_spec(&c.generator)?;
    fs::create_dir_all(&c.out)?;
    let ext = match c.format {
        SeqFormat::Bin => "bin",
        SeqFormat::Txt => "txt",
    };
    let write = |path: &Path, seq: &BitSequence| match c.format {
        SeqFormat::Bin => write_bin(path, seq),
        SeqFormat::Txt => write_ascii(path, seq),
    };
    let mut files = Vec::new();
    if c.packed {
        let total = c
            .n
            .checked_mul(c.m)
            .ok_or_else(|| CliError::Usage("n * m overflows".into()))?;
        let name = format!("stream.{ext}");
        write(&c.out.join(&name), &spec.stream().take(total))?;
        files.push(name);
    } else {
        let width = c.m.to_string().len().max(6);
        for (j, seq) in make_sequence_set(&spec, c.m, c.n)?.iter().enumerate() {
            let name = format!("seq_{:0width$}.{ext}", j + 1);
            write(&c.out.join(&name), seq)?;
            files.push(name);
        }
    }
    let manifest = json!({
        "generator": spec,
        "n": c.n,
        "m": c.m,
        "packed": c.packed,
        "layout": "sequence j is stream bits [j*n, (j+1)*n), MSB-first",
        "files": files,
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    write_text(&c.out.join("manifest.json"), &(text.clone() + "\n"))?;
    println!("{text}");
    Ok(())
}

fn apply_overrides(mut p: BatteryParams, o: &ParamOverrides) -> Result<BatteryParams, CliError> {
    if let Some(v) = o.block_frequency_m {
        p.block_frequency_m = v;
    }
    if let Some(v) = o.serial_m {
        p.serial_m = v;
    }
    if let Some(v) = o.approx_entropy_m {
        p.approx_entropy_m = v;
    }
    if let Some(v) = o.linear_complexity_m {
        p.linear_complexity_m = v;
    }
    if let Some(l) = o.universal_l {
        p.universal_l = l;
        if o.universal_q.is_none() {
            p.universal_q = 10 << l.min(16);
        }
    }
    if let Some(v) = o.universal_q {
        p.universal_q = v;
    }
    p.dft_corrected_variance = o.dft_corrected;
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(p)
}

fn worker_count(w: Option<usize>) -> Result<usize, CliError> {
    match w {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => Ok(w),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn run(c: &RunCmd) -> Result<(), CliError> {
    let workers = worker_count(c.workers)?;
    if let Some(dir) = c.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    if c.input.is_empty() {
        let (n, m) = (c.n.unwrap_or(0), c.m.unwrap_or(0));
        if n == 0 || m < 2 {
            return Err(CliError::Usage("inline generation needs --n >= 1 and --m >= 2".into()));
        }
        let spec = generator_spec(&c.generator)?;
        let params = apply_overrides(BatteryParams::for_length(n), &c.params)?;
        if is_csv(&c.out) {
            let mat = stsdep::pmatrix::compute_generated(&spec, m, &params, workers)?;
            save_matrix(&mat, &c.out)?;
        } else {
            compute_generated_to_file(&spec, m, &params, workers, &c.out)?;
        }
        report_run(&c.out, m, n, &params);
    } else {
        let seqs = c
            .input
            .iter()
            .map(|p| read_sequence(p))
            .collect::<Result<Vec<_>, _>>()?;
        let n = seqs[0].len();
        let params = apply_overrides(BatteryParams::for_length(n), &c.params)?;
        let names = c.input.iter().map(|p| p.display().to_string()).collect();
        let source = MatrixSource::Files { names };
        let mat = if seqs.len() >= 2 {
            compute_matrix(&seqs, &params, workers, source)?
        } else {
            // a single reference file still gets its row
            let mut values = Vec::new();
            compute_rows(seqs, &params, workers, |_, row| {
                values.extend_from_slice(row);
                Ok(())
            })?;
            PValueMatrix::new(
                item_ids(),
                values,
                stsdep::pmatrix::Provenance::battery(source, &params),
            )?
        };
        save_matrix(&mat, &c.out)?;
        report_run(&c.out, mat.m(), n, &params);
    }
    Ok(())
}

fn report_run(out: &Path, m: usize, n: usize, params: &BatteryParams) {
    println!("wrote {} ({m} x 162, n = {n})", out.display());
    for w in params.warnings() {
        eprintln!("warning: {w}");
    }
}

fn read_id_list(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn write_id_list(path: &Path, ids: &[&str]) -> Result<(), CliError> {
    let mut text = ids.join("\n");
    text.push('\n');
    write_text(path, &text)
}

pub fn analyze(c: &AnalyzeCmd) -> Result<(), CliError> {
    let mat = load_matrix(&c.matrix)?;
    let active = match &c.items {
        Some(p) => ActiveSet::from_ids(&mat, &read_id_list(p)?)?,
        None => ActiveSet::full(mat.k())?,
    };
    let q = if c.scramble { scrambled_q(&mat, &active)? } else { q_stat(&mat, &active)? };
    let h = histogram(&q, c.bins)?;
    let gof = h.chi_square_gof().ok();
    let config = json!({
        "command": "analyze",
        "matrix": c.matrix.display().to_string(),
        "mode": q.mode.name(),
        "bins": c.bins,
        "k": active.k(),
        "items": c.items.as_ref().map(|p| p.display().to_string()),
        "provenance": mat.provenance(),
    });
    let s = &h.summary;
    println!("mode {}  m {}  k {}", s.mode.name(), s.m, s.k);
    println!("mean {:.6}  sd {:.6e}  theoretical sd {:.6e}", s.mean, s.sample_sd, s.theoretical_sd);
    println!("I = {:.6}", s.indicator);
    if let Some(g) = &gof {
        println!("chi-square vs normal reference: {:.3} on {} dof, p = {:.4}", g.statistic, g.dof, g.p_value);
    }
    if let Some(out) = &c.out {
        let text = match c.format {
            ReportFormat::Csv => {
                let mut buf = Vec::new();
                h.write_csv(&mut buf, Some(&comment_block(&config)))?;
                String::from_utf8(buf).expect("ascii")
            }
            ReportFormat::Json => {
                let doc = json!({ "config": config, "histogram": h, "goodness_of_fit": gof });
                serde_json::to_string_pretty(&doc)? + "\n"
            }
        };
        write_text(out, &text)?;
    }
    Ok(())
}

fn write_trajectory(t: &GreedyTrajectory, dir: &Path, config: &Value) -> Result<(), CliError> {
    let mut csv = Vec::new();
    t.write_csv(&mut csv, Some(&comment_block(config)))?;
    write_text(&dir.join("trajectory.csv"), &String::from_utf8(csv).expect("ascii"))?;
    let doc = json!({ "config": config, "trajectory": t });
    write_text(&dir.join("trajectory.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))
}

pub fn minset(c: &MinsetCmd) -> Result<(), CliError> {
    let mat = load_matrix(&c.matrix)?;
    let stop = match c.stop {
        StopKind::Full => StopRule::Full,
        StopKind::Threshold => StopRule::Threshold { delta: c.delta },
        StopKind::KMin => StopRule::KMin { k_min: c.k_min.expect("required by clap") },
    };
    let t = greedy_run(&mat, GreedyConfig { stop, delta: c.delta })?;
    let config = json!({
        "command": "minset",
        "matrix": c.matrix.display().to_string(),
        "stop": stop,
        "delta": c.delta,
        "last": c.last,
        "provenance": mat.provenance(),
    });
    fs::create_dir_all(&c.out_dir)?;
    write_trajectory(&t, &c.out_dir, &config)?;
    println!("initial I = {:.6} (k = {})", t.initial_indicator, mat.k());
    println!("{} removals, final I = {:.6}", t.steps.len(), t.indicator_after(t.steps.len()));
    match t.selected_set() {
        Some(sel) => {
            let r = t.selected_after.expect("selected");
            println!(
                "selected set: k = {} after {r} removals, I = {:.6} <= 1 + {}",
                sel.k(),
                t.indicator_after(r),
                c.delta
            );
            write_id_list(&c.out_dir.join("selected.txt"), &sel.ids(mat.item_ids()))?;
        }
        None => println!("no point on the trajectory reached I <= 1 + {}", c.delta),
    }
    if let Some(k) = c.last {
        let survivors = t.survivors(k).ok_or_else(|| {
            CliError::Usage(format!("--last {k}: the run did not get down to {k} items"))
        })?;
        let path = c.out_dir.join(format!("last_{k}.txt"));
        write_id_list(&path, &survivors.ids(mat.item_ids()))?;
        println!("final {k} survivors written to {}", path.display());
    }
    Ok(())
}

pub fn overlap(c: &OverlapCmd) -> Result<(), CliError> {
    let universe: Vec<String> = match &c.matrix {
        Some(p) => load_matrix(p)?.item_ids().to_vec(),
        None => item_ids(),
    };
    let a = ActiveSet::from_ids_in(&universe, &read_id_list(&c.set_a)?)?;
    let b = ActiveSet::from_ids_in(&universe, &read_id_list(&c.set_b)?)?;
    let s = overlap_stats(&a, &b, universe.len())?;
    println!("universe N = {}, set size K = {}", s.universe, s.k);
    println!("observed overlap {}", s.observed);
    println!("hypergeometric expected {:.4}, sd {:.4}", s.expected, s.sd);
    match s.z {
        Some(z) => println!("z = (observed - expected) / sd = {z:.4}"),
        None => println!("z undefined (sd = 0)"),
    }
    Ok(())
}

fn parse_tagged(spec: &str) -> Result<(usize, PathBuf), CliError> {
    let (n, path) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--matrix expects N=PATH, got {spec:?}")))?;
    let n = n
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad sequence length in {spec:?}")))?;
    Ok((n, PathBuf::from(path)))
}

pub fn report(c: &ReportCmd) -> Result<(), CliError> {
    let tagged = c.matrices.iter().map(|s| parse_tagged(s)).collect::<Result<Vec<_>, _>>()?;
    let loaded = tagged
        .iter()
        .map(|(n, p)| Ok((*n, load_matrix(p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let refs: Vec<(usize, &PValueMatrix)> = loaded.iter().map(|(n, m)| (*n, m)).collect();
    let modes: &[QMode] = match c.mode {
        ModeChoice::Plain => &[QMode::Plain],
        ModeChoice::Scrambled => &[QMode::Scrambled],
        ModeChoice::Both => &[QMode::Plain, QMode::Scrambled],
    };
    let mut rows = Vec::new();
    for &mode in modes {
        rows.extend(sd_scaling_report(&refs, mode)?);
    }
    let config = json!({
        "command": "report",
        "matrices": c.matrices,
        "mode": format!("{:?}", c.mode).to_lowercase(),
    });
    let text = match c.format {
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_scaling_csv(&rows, &mut buf, Some(&comment_block(&config)))?;
            String::from_utf8(buf).expect("ascii")
        }
        ReportFormat::Json => serde_json::to_string_pretty(&json!({ "config": config, "rows": rows }))? + "\n",
    };
    match &c.out {
        Some(p) => write_text(p, &text)?,
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
