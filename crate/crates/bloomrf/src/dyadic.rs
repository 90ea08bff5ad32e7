//! Arithmetic over the dyadic interval scheme: layer layout, covering
//! intervals, exact decomposition of query ranges and in-trace bitmasks.
//!
//! A dyadic interval on level `l` of a `d`-bit domain is `[j*2^(d-l),
//! (j+1)*2^(d-l) - 1]`; level 0 is the whole domain and level `d` holds the
//! individual keys. Layers group consecutive levels: layer 0 is the optional
//! exact layer (height `h_0`, 0 meaning absent), layers `1..=L` are hashed
//! trace-tree layers whose traces sit at the bottom level of the layer. The
//! trace of layer `i` is `2^(h_i - 1)` positions wide and must fit a single
//! 64-bit element, so hashed heights are capped at [`MAX_TRACE_HEIGHT`].

use crate::error::LayoutError;

/// Domain widths the filter supports.
pub const SUPPORTED_WIDTHS: [u8; 4] = [8, 16, 32, 64];

/// Largest height of a hashed layer; keeps traces inside one 64-bit element.
pub const MAX_TRACE_HEIGHT: u8 = 7;

/// All-ones mask over the low `bits` bits.
#[inline]
pub(crate) fn low_mask(bits: u8) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Per-layer geometry derived from the domain width and the height vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    d: u8,
    heights: Vec<u8>,
    bottom_levels: Vec<u8>,
}

impl LayerLayout {
    /// Domain width in bits.
    pub fn domain_bits(&self) -> u8 {
        self.d
    }

    /// Mask selecting the valid key bits of the domain.
    pub fn domain_mask(&self) -> u64 {
        low_mask(self.d)
    }

    /// Number of hashed layers `L` (the exact layer is not counted).
    pub fn num_layers(&self) -> usize {
        self.heights.len() - 1
    }

    /// Height vector `h_0..h_L`.
    pub fn heights(&self) -> &[u8] {
        &self.heights
    }

    /// Height of layer `i` in dyadic levels.
    pub fn height(&self, layer: usize) -> u8 {
        self.heights[layer]
    }

    /// Bottom level of layer `i`: the prefix sum of heights up to `i`.
    pub fn bottom_level(&self, layer: usize) -> u8 {
        self.bottom_levels[layer]
    }

    pub fn bottom_levels(&self) -> &[u8] {
        &self.bottom_levels
    }

    /// Whether an exact layer is present (`h_0 > 0`).
    pub fn has_exact_layer(&self) -> bool {
        self.heights[0] > 0
    }

    /// Bottom level of the exact layer.
    pub fn exact_level(&self) -> u8 {
        self.bottom_levels[0]
    }

    /// `b_i = h_i - 1`: bits addressing one trace position of hashed layer `i`.
    pub fn trace_bits(&self, layer: usize) -> u8 {
        debug_assert!(layer >= 1);
        self.heights[layer] - 1
    }

    /// Trace width of hashed layer `i` in positions (= bits), `2^{b_i}`.
    pub fn trace_len(&self, layer: usize) -> u64 {
        1u64 << self.trace_bits(layer)
    }

    /// Level of the trace-tree roots of hashed layer `i`.
    pub fn tt_root_level(&self, layer: usize) -> u8 {
        debug_assert!(layer >= 1);
        self.bottom_levels[layer - 1] + 1
    }

    /// Number of trace-trees on hashed layer `i`: `2^{l_{i-1}+1}`.
    pub fn tt_count(&self, layer: usize) -> u128 {
        1u128 << self.tt_root_level(layer)
    }

    /// Total number of trace-trees across all hashed layers.
    pub fn tt_max(&self) -> u128 {
        (1..=self.num_layers()).map(|i| self.tt_count(i)).sum()
    }
}

/// A level-tagged interval of the canonical dyadic scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicInterval {
    pub level: u8,
    pub lo: u64,
    pub hi: u64,
}

impl DyadicInterval {
    /// Number of keys covered; `None` for the full 64-bit domain.
    pub fn len(&self) -> Option<u64> {
        (self.hi - self.lo).checked_add(1)
    }

    pub fn contains(&self, key: u64) -> bool {
        self.lo <= key && key <= self.hi
    }
}

/// Builds the layer layout for domain width `d` and the given height vector.
///
/// `heights[0]` is the exact layer (0 = absent), later entries are hashed
/// layers and must be in `1..=MAX_TRACE_HEIGHT`. The heights must sum to `d`.
pub fn build_layout(d: u8, heights: &[u8]) -> Result<LayerLayout, LayoutError> {
    if !SUPPORTED_WIDTHS.contains(&d) {
        return Err(LayoutError::UnsupportedWidth(d));
    }
    if heights.is_empty() {
        return Err(LayoutError::EmptyHeights);
    }
    let sum: u32 = heights.iter().map(|&h| h as u32).sum();
    if sum != d as u32 {
        return Err(LayoutError::SumMismatch { got: sum, want: d });
    }
    for (i, &h) in heights.iter().enumerate().skip(1) {
        if h == 0 {
            return Err(LayoutError::ZeroHeight(i));
        }
        if h > MAX_TRACE_HEIGHT {
            return Err(LayoutError::TraceTooWide {
                layer: i,
                height: h,
                max: MAX_TRACE_HEIGHT,
            });
        }
    }
    let mut bottom_levels = Vec::with_capacity(heights.len());
    let mut acc = 0u8;
    for &h in heights {
        acc += h;
        bottom_levels.push(acc);
    }
    Ok(LayerLayout {
        d,
        heights: heights.to_vec(),
        bottom_levels,
    })
}

/// The unique level-`level` dyadic interval containing `key`.
pub fn covering_interval(d: u8, key: u64, level: u8) -> Result<DyadicInterval, LayoutError> {
    if level > d {
        return Err(LayoutError::LevelOutOfRange { level, max: d });
    }
    let span = d - level;
    let key = key & low_mask(d);
    let lo = key & !low_mask(span);
    Ok(DyadicInterval {
        level,
        lo,
        hi: lo | low_mask(span),
    })
}

/// Exact dyadic decomposition of the closed range `[lo, hi]`.
///
/// Returns maximal, pairwise disjoint dyadic intervals in ascending key
/// order whose union is exactly `[lo, hi]`. At most `2*log2(hi-lo+1) + 2`
/// intervals are produced.
///
/// # Panics
///
/// Panics if `lo > hi` or a bound exceeds the `d`-bit domain.
pub fn dyadic_decompose(d: u8, lo: u64, hi: u64) -> Vec<DyadicInterval> {
    assert!(lo <= hi, "dyadic_decompose: lo {lo} > hi {hi}");
    assert!(
        hi <= low_mask(d),
        "dyadic_decompose: hi {hi} outside {d}-bit domain"
    );
    let mut out = Vec::new();
    let mut cur = lo as u128;
    let hi = hi as u128;
    while cur <= hi {
        // Largest aligned block starting at `cur` that still fits in the range.
        let align = if cur == 0 {
            d as u32
        } else {
            cur.trailing_zeros().min(d as u32)
        };
        let remaining = hi - cur + 1;
        let fit = 127 - remaining.leading_zeros();
        let size_bits = align.min(fit) as u8;
        let lo_k = cur as u64;
        out.push(DyadicInterval {
            level: d - size_bits,
            lo: lo_k,
            hi: lo_k | low_mask(size_bits),
        });
        cur += 1u128 << size_bits;
    }
    out
}

/// Bitmask over the trace of the layer-`layer` trace-tree containing
/// `any_key_in_tt`: bit `p` is set iff trace position `p`'s dyadic interval
/// intersects `[lo, hi]`. The set bits are always contiguous.
pub fn trace_bitmask(
    layout: &LayerLayout,
    layer: usize,
    any_key_in_tt: u64,
    lo: u64,
    hi: u64,
) -> Result<u64, LayoutError> {
    if layer < 1 || layer > layout.num_layers() {
        return Err(LayoutError::LayerOutOfRange {
            layer,
            max: layout.num_layers(),
        });
    }
    let d = layout.d;
    let tt = covering_interval(d, any_key_in_tt, layout.tt_root_level(layer))?;
    if lo > tt.hi || hi < tt.lo {
        return Err(LayoutError::NoIntersection { lo, hi });
    }
    let pos_span = d - layout.bottom_level(layer);
    let p0 = (lo.max(tt.lo) - tt.lo) >> pos_span;
    let p1 = (hi.min(tt.hi) - tt.lo) >> pos_span;
    Ok(bit_run(p0 as u32, p1 as u32))
}

/// Mask with bits `p0..=p1` set.
#[inline]
pub(crate) fn bit_run(p0: u32, p1: u32) -> u64 {
    debug_assert!(p0 <= p1 && p1 < 64);
    (u64::MAX >> (63 - (p1 - p0))) << p0
}

/// Renders the low `width` bits of a trace mask in trace order: position 0
/// first, as traces are drawn left-to-right with ascending keys.
pub fn trace_order_string(mask: u64, width: u32) -> String {
    (0..width)
        .map(|p| if mask >> p & 1 == 1 { '1' } else { '0' })
        .collect()
}
