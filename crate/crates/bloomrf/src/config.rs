//! Filter configuration: segment map, replica counts, probe window and the
//! canonical text form consumed by the CLI and emitted by the advisor.

use crate::dyadic::{build_layout, LayerLayout};
use crate::error::ConfigError;

/// Default seed for the hash family when none is given.
pub const DEFAULT_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// Default early-stop threshold on the popcount of a masked trace element.
pub const DEFAULT_EARLY_STOP: u32 = 3;

/// Cutoff on the modelled interval occupancy above which a top hashed layer
/// is considered saturated and skipped.
pub const SATURATION_CUTOFF: f64 = 0.9;

/// Full description of a filter instance.
///
/// * `replicas[i-1]` is `k_i`, the number of hash functions of hashed layer
///   `i` (the piecewise-monotone one plus its replicas).
/// * `segment_of[i]` assigns layer `i` (0 = exact layer) to a segment.
/// * `segment_bits[j]` is the size of segment `j` in bits, a multiple of 64.
/// * Hashed layers below `start_layer` are saturated and never written or
///   probed; the exact layer, when present, always is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    layout: LayerLayout,
    replicas: Vec<u8>,
    segment_of: Vec<u8>,
    segment_bits: Vec<u64>,
    early_stop_threshold: Option<u32>,
    start_layer: usize,
    seed: u64,
}

impl FilterConfig {
    pub fn builder(layout: LayerLayout) -> ConfigBuilder {
        ConfigBuilder::new(layout)
    }

    /// Basic configuration: uniform 64-bit traces (plus a remainder stub at
    /// the top when the width is not a multiple of 7), one shared segment,
    /// one hash function per layer, no exact layer.
    pub fn basic(d: u8, expected_keys: u64, total_bits: u64, seed: u64) -> Result<Self, ConfigError> {
        let mut heights = vec![0u8];
        let rem = d % 7;
        if rem > 0 {
            heights.push(rem);
        }
        heights.extend(std::iter::repeat(7).take((d / 7) as usize));
        let layout = build_layout(d, &heights)?;
        let bits = (total_bits / 64).max(1) * 64;
        let hashed = layout.num_layers();
        let start = pick_start_layer(&layout, expected_keys, SATURATION_CUTOFF);
        ConfigBuilder::new(layout)
            .replicas(vec![1; hashed])
            .single_segment(bits)
            .seed(seed)
            .start_layer(start)
            .build()
    }

    pub fn layout(&self) -> &LayerLayout {
        &self.layout
    }

    pub fn domain_bits(&self) -> u8 {
        self.layout.domain_bits()
    }

    pub fn num_layers(&self) -> usize {
        self.layout.num_layers()
    }

    pub fn has_exact_layer(&self) -> bool {
        self.layout.has_exact_layer()
    }

    /// Replica count `k_i` of hashed layer `i in 1..=L`.
    pub fn replicas(&self, layer: usize) -> usize {
        self.replicas[layer - 1] as usize
    }

    pub fn replica_counts(&self) -> &[u8] {
        &self.replicas
    }

    /// Segment holding layer `i` (0 = exact layer).
    pub fn segment_of(&self, layer: usize) -> usize {
        self.segment_of[layer] as usize
    }

    pub fn segment_map(&self) -> &[u8] {
        &self.segment_of
    }

    pub fn num_segments(&self) -> usize {
        self.segment_bits.len()
    }

    /// Size of segment `j` in bits.
    pub fn segment_bits(&self, segment: usize) -> u64 {
        self.segment_bits[segment]
    }

    pub fn segment_sizes(&self) -> &[u64] {
        &self.segment_bits
    }

    pub fn total_bits(&self) -> u64 {
        self.segment_bits.iter().sum()
    }

    pub fn early_stop_threshold(&self) -> Option<u32> {
        self.early_stop_threshold
    }

    pub fn start_layer(&self) -> usize {
        self.start_layer
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Hashed layers that are actually written and probed.
    pub fn probed_layers(&self) -> std::ops::RangeInclusive<usize> {
        self.start_layer..=self.num_layers()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        let layers = self.num_layers();
        if self.replicas.len() != layers {
            return invalid(format!(
                "{} replica counts for {} hashed layers",
                self.replicas.len(),
                layers
            ));
        }
        if let Some(i) = self.replicas.iter().position(|&k| k == 0) {
            return invalid(format!("hashed layer {} has zero hash functions", i + 1));
        }
        if self.segment_of.len() != layers + 1 {
            return invalid(format!(
                "{} segment assignments for {} layers",
                self.segment_of.len(),
                layers + 1
            ));
        }
        if self.segment_bits.is_empty() {
            return invalid("no segments".into());
        }
        for (j, &m) in self.segment_bits.iter().enumerate() {
            if m == 0 || m % 64 != 0 {
                return invalid(format!(
                    "segment {j} holds {m} bits; sizes must be positive multiples of 64"
                ));
            }
        }
        let mut referenced = vec![false; self.segment_bits.len()];
        let mut mark = |layer: usize, seg: u8| -> Result<(), ConfigError> {
            let seg = seg as usize;
            if seg >= self.segment_bits.len() {
                return Err(ConfigError::Invalid(format!(
                    "layer {layer} assigned to nonexistent segment {seg}"
                )));
            }
            referenced[seg] = true;
            Ok(())
        };
        for i in 1..=layers {
            mark(i, self.segment_of[i])?;
        }
        if self.has_exact_layer() {
            let seg = self.segment_of[0] as usize;
            mark(0, self.segment_of[0])?;
            let l0 = self.layout.exact_level();
            let want = 1u64 << l0;
            if self.segment_bits[seg] != want {
                return invalid(format!(
                    "exact segment {seg} holds {} bits; a level-{l0} exact layer needs exactly {want}",
                    self.segment_bits[seg]
                ));
            }
            if (1..=layers).any(|i| self.segment_of[i] as usize == seg) {
                return invalid(format!("exact segment {seg} must not be shared with hashed layers"));
            }
        }
        if let Some(j) = referenced.iter().position(|&r| !r) {
            return invalid(format!("segment {j} is not assigned to any layer"));
        }
        if layers > 0 {
            if self.start_layer < 1 || self.start_layer > layers {
                return invalid(format!(
                    "start layer {} outside [1, {layers}]",
                    self.start_layer
                ));
            }
        } else {
            if !self.has_exact_layer() {
                return invalid("layout has neither an exact layer nor hashed layers".into());
            }
            if self.start_layer != 1 {
                return invalid("start layer must be 1 when no hashed layers exist".into());
            }
        }
        if let Some(t) = self.early_stop_threshold {
            if t >= u16::MAX as u32 {
                return invalid(format!("early-stop threshold {t} exceeds the format limit"));
            }
        }
        Ok(())
    }

    /// Canonical key=value text form.
    pub fn to_canonical_text(&self) -> String {
        let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(",");
        let mut s = String::new();
        s.push_str(&format!("d={}\n", self.domain_bits()));
        s.push_str(&format!(
            "heights={}\n",
            join(&mut self.layout.heights().iter().map(|h| h.to_string()))
        ));
        s.push_str(&format!(
            "replicas={}\n",
            join(&mut self.replicas.iter().map(|k| k.to_string()))
        ));
        s.push_str(&format!(
            "segment_of={}\n",
            join(&mut self.segment_of.iter().map(|j| j.to_string()))
        ));
        s.push_str(&format!(
            "segment_bits={}\n",
            join(&mut self.segment_bits.iter().map(|m| m.to_string()))
        ));
        s.push_str(&format!("seed=0x{:016x}\n", self.seed));
        match self.early_stop_threshold {
            Some(t) => s.push_str(&format!("early_stop_threshold={t}\n")),
            None => s.push_str("early_stop_threshold=disabled\n"),
        }
        s.push_str(&format!("start_layer={}\n", self.start_layer));
        s
    }

    /// Parses the canonical key=value form. Unknown keys are rejected;
    /// `replicas` and `start_layer` may be omitted (defaults: 1 per layer, 1).
    pub fn from_canonical_text(text: &str) -> Result<Self, ConfigError> {
        let mut d: Option<u8> = None;
        let mut heights: Option<Vec<u8>> = None;
        let mut replicas: Option<Vec<u8>> = None;
        let mut segment_of: Option<Vec<u8>> = None;
        let mut segment_bits: Option<Vec<u64>> = None;
        let mut seed = DEFAULT_SEED;
        let mut early = Some(DEFAULT_EARLY_STOP);
        let mut start_layer = 1usize;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| ConfigError::Parse { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key=value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let parse_u64 = |v: &str| -> Result<u64, ConfigError> {
                let parsed = if let Some(hex) = v.strip_prefix("0x") {
                    u64::from_str_radix(hex, 16)
                } else {
                    v.parse()
                };
                parsed.map_err(|e| err(format!("bad number {v:?}: {e}")))
            };
            let parse_list_u8 = |v: &str| -> Result<Vec<u8>, ConfigError> {
                v.split(',')
                    .map(|p| p.trim().parse().map_err(|e| err(format!("bad entry {p:?}: {e}"))))
                    .collect()
            };
            match key {
                "d" => d = Some(parse_u64(value)? as u8),
                "heights" => heights = Some(parse_list_u8(value)?),
                "replicas" => replicas = Some(parse_list_u8(value)?),
                "segment_of" => segment_of = Some(parse_list_u8(value)?),
                "segment_bits" => {
                    segment_bits = Some(
                        value
                            .split(',')
                            .map(|p| parse_u64(p.trim()))
                            .collect::<Result<_, _>>()?,
                    )
                }
                "seed" => seed = parse_u64(value)?,
                "early_stop_threshold" => {
                    early = if value == "disabled" {
                        None
                    } else {
                        Some(parse_u64(value)? as u32)
                    }
                }
                "start_layer" => start_layer = parse_u64(value)? as usize,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }

        let missing = |what: &str| ConfigError::Parse {
            line: 0,
            msg: format!("missing required key {what:?}"),
        };
        let d = d.ok_or_else(|| missing("d"))?;
        let heights = heights.ok_or_else(|| missing("heights"))?;
        let layout = build_layout(d, &heights)?;
        let layers = layout.num_layers();
        let segment_of = segment_of.ok_or_else(|| missing("segment_of"))?;
        let segment_bits = segment_bits.ok_or_else(|| missing("segment_bits"))?;
        ConfigBuilder::new(layout)
            .replicas(replicas.unwrap_or_else(|| vec![1; layers]))
            .segments(segment_of, segment_bits)
            .seed(seed)
            .early_stop(early)
            .start_layer(start_layer)
            .build()
    }
}

/// Builder for [`FilterConfig`]; `build` validates every invariant.
pub struct ConfigBuilder {
    layout: LayerLayout,
    replicas: Option<Vec<u8>>,
    segment_of: Option<Vec<u8>>,
    segment_bits: Option<Vec<u64>>,
    early_stop_threshold: Option<u32>,
    start_layer: usize,
    seed: u64,
}

impl ConfigBuilder {
    pub fn new(layout: LayerLayout) -> Self {
        ConfigBuilder {
            layout,
            replicas: None,
            segment_of: None,
            segment_bits: None,
            early_stop_threshold: Some(DEFAULT_EARLY_STOP),
            start_layer: 1,
            seed: DEFAULT_SEED,
        }
    }

    /// Replica counts `k_1..k_L`.
    pub fn replicas(mut self, replicas: Vec<u8>) -> Self {
        self.replicas = Some(replicas);
        self
    }

    /// Places all layers in one shared segment of `bits` bits. Only valid
    /// without an exact layer.
    pub fn single_segment(mut self, bits: u64) -> Self {
        self.segment_of = Some(vec![0; self.layout.num_layers() + 1]);
        self.segment_bits = Some(vec![bits]);
        self
    }

    pub fn segments(mut self, segment_of: Vec<u8>, segment_bits: Vec<u64>) -> Self {
        self.segment_of = Some(segment_of);
        self.segment_bits = Some(segment_bits);
        self
    }

    pub fn early_stop(mut self, threshold: Option<u32>) -> Self {
        self.early_stop_threshold = threshold;
        self
    }

    pub fn start_layer(mut self, layer: usize) -> Self {
        self.start_layer = layer;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn build(self) -> Result<FilterConfig, ConfigError> {
        let layers = self.layout.num_layers();
        let config = FilterConfig {
            replicas: self.replicas.unwrap_or_else(|| vec![1; layers]),
            segment_of: self
                .segment_of
                .ok_or_else(|| ConfigError::Invalid("no segment assignment".into()))?,
            segment_bits: self
                .segment_bits
                .ok_or_else(|| ConfigError::Invalid("no segment sizes".into()))?,
            early_stop_threshold: self.early_stop_threshold,
            start_layer: if layers == 0 { 1 } else { self.start_layer },
            seed: self.seed,
            layout: self.layout,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Lowest hashed layer whose modelled interval occupancy stays under
/// `cutoff`; saturated layers above it carry no information and are skipped.
pub fn pick_start_layer(layout: &LayerLayout, expected_keys: u64, cutoff: f64) -> usize {
    let layers = layout.num_layers();
    if layers == 0 {
        return 1;
    }
    for i in 1..=layers {
        let level = layout.bottom_level(i);
        let intervals = (level as f64).exp2();
        let occupancy = 1.0 - (-(expected_keys as f64) / intervals).exp();
        if occupancy <= cutoff {
            return i;
        }
    }
    layers
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_config() -> FilterConfig {
        let layout = build_layout(8, &[0, 4, 4]).unwrap();
        FilterConfig::builder(layout).single_segment(64).build().unwrap()
    }

    #[test]
    fn builds_shared_segment_config() {
        let c = fig2_config();
        assert_eq!(c.num_segments(), 1);
        assert_eq!(c.total_bits(), 64);
        assert_eq!(c.replicas(1), 1);
        assert_eq!(c.start_layer(), 1);
        assert_eq!(c.early_stop_threshold(), Some(DEFAULT_EARLY_STOP));
    }

    #[test]
    fn builds_three_segment_config() {
        // Shape of the worked tuning template with a level-28 exact layer.
        let layout = build_layout(64, &[28, 2, 2, 4, 7, 7, 7, 7]).unwrap();
        let c = FilterConfig::builder(layout)
            .replicas(vec![2, 1, 1, 1, 1, 1, 1])
            .segments(vec![0, 1, 1, 1, 2, 2, 2, 2], vec![1 << 28, 1 << 26, 1 << 25])
            .build()
            .unwrap();
        assert_eq!(c.num_segments(), 3);
        assert!(c.has_exact_layer());
        assert_eq!(c.segment_of(0), 0);
        assert_eq!(c.replicas(1), 2);
    }

    #[test]
    fn rejects_unaligned_segment() {
        let layout = build_layout(8, &[0, 4, 4]).unwrap();
        let err = FilterConfig::builder(layout).single_segment(96).build();
        assert!(matches!(err, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn rejects_wrong_exact_segment_size() {
        let layout = build_layout(16, &[8, 4, 4]).unwrap();
        let err = FilterConfig::builder(layout)
            .segments(vec![0, 1, 1], vec![128, 4096])
            .build();
        assert!(matches!(err, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn rejects_shared_exact_segment() {
        let layout = build_layout(16, &[8, 4, 4]).unwrap();
        let err = FilterConfig::builder(layout)
            .segments(vec![0, 0, 0], vec![256])
            .build();
        assert!(matches!(err, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn exact_only_layout_is_valid() {
        let layout = build_layout(16, &[16]).unwrap();
        let c = FilterConfig::builder(layout)
            .segments(vec![0], vec![1 << 16])
            .build()
            .unwrap();
        assert_eq!(c.num_layers(), 0);
        assert!(c.has_exact_layer());
    }

    #[test]
    fn canonical_text_round_trip() {
        let c = fig2_config();
        let text = c.to_canonical_text();
        let back = FilterConfig::from_canonical_text(&text).unwrap();
        assert_eq!(c, back);

        let layout = build_layout(64, &[28, 2, 2, 4, 7, 7, 7, 7]).unwrap();
        let c = FilterConfig::builder(layout)
            .replicas(vec![2, 1, 1, 1, 1, 1, 1])
            .segments(vec![0, 1, 1, 1, 2, 2, 2, 2], vec![1 << 28, 1 << 26, 1 << 25])
            .seed(42)
            .early_stop(None)
            .start_layer(1)
            .build()
            .unwrap();
        let back = FilterConfig::from_canonical_text(&c.to_canonical_text()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = FilterConfig::from_canonical_text("d=8\nbogus line\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn start_layer_follows_saturation() {
        // 10^6 keys saturate levels 8 and 15 of a basic 64-bit layout.
        let c = FilterConfig::basic(64, 1_000_000, 1 << 24, 1).unwrap();
        let level = c.layout().bottom_level(c.start_layer());
        let occupancy = 1.0 - (-1.0e6 / (level as f64).exp2()).exp();
        assert!(occupancy <= SATURATION_CUTOFF);
        if c.start_layer() > 1 {
            let above = c.layout().bottom_level(c.start_layer() - 1);
            let occ_above = 1.0 - (-1.0e6 / (above as f64).exp2()).exp();
            assert!(occ_above > SATURATION_CUTOFF);
        }
        // Empty filter probes everything.
        let c = FilterConfig::basic(64, 0, 1 << 20, 1).unwrap();
        assert_eq!(c.start_layer(), 1);
    }
}
