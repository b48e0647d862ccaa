//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use recgan::codec::CodecConfig;
use recgan::gan::GanConfig;
use recgan::ingest::{validate_edges, Scheme, N_SEGMENTS};
use recgan::nn::AdamConfig;
use recgan::synth::SynthConfig;

use crate::CliError;

/// Every recognised key with its default value.
const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "42"),
    ("paths.workdir", "."),
    ("paths.events", "events.csv"),
    ("paths.catalog", "catalog.csv"),
    ("ingest.scheme", "view,buy"),
    ("ingest.bin_edges", "2,4,8,16"),
    ("codec.width", "300"),
    ("codec.prior", "1/2"),
    ("gan.z_dim", "100"),
    ("gan.g_widths", "128,256"),
    ("gan.d_widths", "512,256,64"),
    ("gan.pool_window", "2,2"),
    ("gan.pool_stride", "2,2"),
    ("gan.dropout_rate", "0.25"),
    ("gan.label_smooth", "0.9"),
    ("gan.batch_size", "16"),
    ("gan.epochs", "1100"),
    ("gan.max_steps", "none"),
    ("gan.checkpoint_every", "0"),
    ("gan.learning_rate", "0.001"),
    ("gan.beta1", "0.9"),
    ("gan.beta2", "0.999"),
    ("gan.epsilon", "1e-7"),
    ("sample.n_realizations", "200"),
    ("sample.segments", "all"),
    ("sample.threshold", "0"),
    ("sample.subsample", "1"),
    ("null.trials", "100"),
    ("synth.n_categories", "40"),
    ("synth.items_per_category", "50"),
    ("synth.n_segments", "4"),
    ("synth.visitors_per_segment", "200"),
    ("synth.p_view", "0.3"),
    ("synth.p_buy_given_view", "0.5"),
    ("runtime.workers", "0"),
    ("runtime.deterministic", "false"),
    ("report.format", "text"),
];

/// Raw key/value settings, always holding every known key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Settings(BTreeMap<String, String>);

impl Default for Settings {
    fn default() -> Self {
        Settings(DEFAULTS.iter().map(|&(k, v)| (k.to_string(), v.to_string())).collect())
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.0.get_mut(key) {
            Some(v) => {
                *v = value.trim().to_string();
                Ok(())
            }
            None => Err(CliError::validation(format!("unknown config key `{key}`"))),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        &self.0[key]
    }

    /// Applies `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::validation(format!("{origin}:{}: {}", i + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn apply_assignment(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("--set expects key=value, got `{kv}`")))?;
        self.set(k.trim(), v)
    }

    /// Sorted `key = value` lines; parses back to the same settings.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| CliError::validation(format!("config key `{key}`: cannot parse `{v}`")))
    }

    fn list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        self.get(key)
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| CliError::validation(format!("config key `{key}`: bad list `{}`", self.get(key))))
            })
            .collect()
    }

    fn pair(&self, key: &str) -> Result<(usize, usize), CliError> {
        match self.list(key)?[..] {
            [a, b] => Ok((a, b)),
            _ => Err(CliError::validation(format!("config key `{key}` needs two values"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub settings: Settings,
    pub seed: u64,
    pub workdir: PathBuf,
    pub events: PathBuf,
    pub catalog: PathBuf,
    pub scheme: Scheme,
    pub bin_edges: [u64; 4],
    pub codec: CodecConfig,
    /// Architecture and training settings; `rows` and `width` are filled in
    /// from the coded dataset.
    pub gan: GanConfig,
    pub n_realizations: usize,
    /// `None` samples every segment.
    pub segments: Option<Vec<usize>>,
    pub threshold: f32,
    pub subsample: f64,
    pub null_trials: usize,
    pub synth: SynthConfig,
    pub workers: usize,
    pub deterministic: bool,
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

impl RunConfig {
    pub fn from_settings(settings: Settings) -> Result<Self, CliError> {
        let s = &settings;
        let seed: u64 = s.parse("seed")?;
        let workdir = PathBuf::from(s.get("paths.workdir"));
        let resolve = |key: &str| {
            let p = Path::new(s.get(key));
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                workdir.join(p)
            }
        };
        let scheme: Scheme = s
            .get("ingest.scheme")
            .parse()
            .map_err(|e: recgan::Error| CliError::validation(e.to_string()))?;
        let edges: Vec<u64> = s
            .get("ingest.bin_edges")
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::validation("ingest.bin_edges must be integers".to_string()))?;
        let bin_edges: [u64; 4] = edges
            .try_into()
            .map_err(|_| CliError::validation(format!("ingest.bin_edges needs {} values", N_SEGMENTS - 1)))?;
        validate_edges(&bin_edges)?;

        let (prior_num, prior_den) = s
            .get("codec.prior")
            .split_once('/')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| CliError::validation("codec.prior must look like `1/2`".to_string()))?;
        let codec = CodecConfig {
            width: s.parse("codec.width")?,
            prior_num,
            prior_den,
        };
        codec.validate()?;

        let z_dim = s.parse("gan.z_dim")?;
        let max_steps = match s.get("gan.max_steps") {
            "none" | "" => None,
            _ => Some(s.parse("gan.max_steps")?),
        };
        let gan = GanConfig {
            rows: 2,
            width: 2,
            z_dim,
            n_segments: N_SEGMENTS,
            g_embed_dim: z_dim,
            g_widths: s.list("gan.g_widths")?,
            d_widths: s.list("gan.d_widths")?,
            pool_window: s.pair("gan.pool_window")?,
            pool_stride: s.pair("gan.pool_stride")?,
            dropout_rate: s.parse("gan.dropout_rate")?,
            label_smooth: s.parse("gan.label_smooth")?,
            batch_size: s.parse("gan.batch_size")?,
            epochs: s.parse("gan.epochs")?,
            adam: AdamConfig {
                lr: s.parse("gan.learning_rate")?,
                beta1: s.parse("gan.beta1")?,
                beta2: s.parse("gan.beta2")?,
                eps: s.parse("gan.epsilon")?,
            },
            seed,
            checkpoint_every: s.parse("gan.checkpoint_every")?,
            max_steps,
        };
        gan.validate()?;

        let segments = match s.get("sample.segments") {
            "all" => None,
            _ => {
                let v = s.list("sample.segments")?;
                if let Some(bad) = v.iter().find(|&&y| y >= N_SEGMENTS) {
                    return Err(CliError::validation(format!("sample.segments: segment {bad} out of range")));
                }
                Some(v)
            }
        };
        let subsample: f64 = s.parse("sample.subsample")?;
        if !(subsample > 0.0 && subsample <= 1.0) {
            return Err(CliError::validation(format!("sample.subsample {subsample} not in (0, 1]")));
        }
        let n_realizations: usize = s.parse("sample.n_realizations")?;
        let null_trials: usize = s.parse("null.trials")?;
        if n_realizations == 0 || null_trials == 0 {
            return Err(CliError::validation(
                "sample.n_realizations and null.trials must be positive".to_string(),
            ));
        }

        let synth = SynthConfig::new(
            s.parse("synth.n_categories")?,
            s.parse("synth.items_per_category")?,
            s.parse("synth.n_segments")?,
            s.parse("synth.visitors_per_segment")?,
            s.parse("synth.p_view")?,
            s.parse("synth.p_buy_given_view")?,
            seed,
        )?;

        let format = match s.get("report.format") {
            "text" => Format::Text,
            "json" => Format::Json,
            other => return Err(CliError::validation(format!("report.format `{other}` is not text or json"))),
        };

        Ok(RunConfig {
            seed,
            events: resolve("paths.events"),
            catalog: resolve("paths.catalog"),
            workdir,
            scheme,
            bin_edges,
            codec,
            gan,
            n_realizations,
            segments,
            threshold: s.parse("sample.threshold")?,
            subsample,
            null_trials,
            synth,
            workers: s.parse("runtime.workers")?,
            deterministic: s.parse("runtime.deterministic")?,
            format,
            settings,
        })
    }

    /// Seed of a pipeline stage, derived from the run seed.
    pub fn stage_seed(&self, stage: u64) -> u64 {
        self.seed.wrapping_add(stage.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = RunConfig::from_settings(Settings::default()).unwrap();
        assert_eq!(c.codec.width, 300);
        assert_eq!(c.gan.g_widths, vec![128, 256]);
        assert_eq!(c.bin_edges, [2, 4, 8, 16]);
        assert!(c.segments.is_none());
    }

    #[test]
    fn text_round_trips() {
        let mut s = Settings::default();
        s.apply_text("# comment\ngan.epochs = 7\nsample.segments=1,2\n\n", "test").unwrap();
        let mut back = Settings::default();
        back.apply_text(&s.to_text(), "echo").unwrap();
        assert_eq!(back, s);
        let c = RunConfig::from_settings(back).unwrap();
        assert_eq!(c.gan.epochs, 7);
        assert_eq!(c.segments, Some(vec![1, 2]));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut s = Settings::default();
        assert!(s.apply_text("gan.nope = 1", "t").is_err());
        assert!(s.apply_text("gan.epochs", "t").is_err());
        s.set("gan.epochs", "many").unwrap();
        assert!(RunConfig::from_settings(s).is_err());
        let mut s = Settings::default();
        s.set("ingest.bin_edges", "4,2,8,16").unwrap();
        assert!(RunConfig::from_settings(s).is_err());
    }
}
