//! Keyboard layouts: QAP-optimized, QWERTY, vertical flips, and their
//! Fitts-digraph energy.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{joint_probabilities, DigraphMatrix, Symbol, ALPHABET_LEN};
use crate::error::{Error, Result};
use crate::fitts::{generic_model, predict_mt, DirectionalFittsModel};
use crate::hexgeom::{angle_deg, build_grid, distance_px, HexGrid, KeyPosition};
use crate::qap::{solve_faq, Assignment, FaqParams, QapInstance};

/// Largest row or column count an optimized layout may use.
pub const MAX_AXIS_KEYS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    Personalized,
    Generic,
    Qwerty,
}

impl std::str::FromStr for LayoutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "personalized" => Ok(LayoutKind::Personalized),
            "generic" => Ok(LayoutKind::Generic),
            "qwerty" => Ok(LayoutKind::Qwerty),
            other => Err(Error::invalid(format!("unknown layout kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyAssignment {
    pub char: Symbol,
    pub row: usize,
    pub col: usize,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the model's JSON, when a fitted model was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_sha256: Option<String>,
    /// SHA-256 of the digraph-count JSON the flow came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digraphs_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<FaqParams>,
    /// QAP objective of the assignment, seconds per keystroke.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default)]
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutDoc")]
pub struct KeyboardLayout {
    pub kind: LayoutKind,
    grid: HexGrid,
    /// Indexed by symbol, alphabet order.
    keys: Vec<KeyAssignment>,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
struct LayoutDoc {
    kind: LayoutKind,
    grid: HexGrid,
    keys: Vec<KeyAssignment>,
    #[serde(default)]
    provenance: Provenance,
}

impl TryFrom<LayoutDoc> for KeyboardLayout {
    type Error = Error;

    fn try_from(doc: LayoutDoc) -> Result<Self> {
        let mut by_symbol: Vec<Option<usize>> = vec![None; ALPHABET_LEN];
        for k in &doc.keys {
            let idx = doc
                .grid
                .index_of(k.row, k.col)
                .ok_or_else(|| Error::invalid(format!("key {} at ({}, {}) is off the grid", k.char, k.row, k.col)))?;
            let slot = &mut by_symbol[k.char.index()];
            if slot.is_some() {
                return Err(Error::invalid(format!("symbol {:?} assigned twice", k.char.to_char())));
            }
            *slot = Some(idx);
        }
        let positions = by_symbol
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                p.ok_or_else(|| {
                    Error::invalid(format!(
                        "symbol {:?} has no key",
                        Symbol::from_index(i).unwrap().to_char()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        KeyboardLayout::from_positions(doc.kind, doc.grid, &positions, doc.provenance)
    }
}

impl KeyboardLayout {
    /// `positions[symbol index]` is the grid index holding that symbol.
    pub fn from_positions(
        kind: LayoutKind,
        grid: HexGrid,
        positions: &[usize],
        provenance: Provenance,
    ) -> Result<Self> {
        if positions.len() != ALPHABET_LEN {
            return Err(Error::invalid(format!(
                "layout needs {ALPHABET_LEN} keys, got {}",
                positions.len()
            )));
        }
        if kind != LayoutKind::Qwerty && (grid.rows() > MAX_AXIS_KEYS || grid.cols() > MAX_AXIS_KEYS) {
            return Err(Error::invalid(format!(
                "grid {}×{} exceeds {MAX_AXIS_KEYS} keys per axis",
                grid.rows(),
                grid.cols()
            )));
        }
        let mut used = vec![false; grid.len()];
        let mut keys = Vec::with_capacity(ALPHABET_LEN);
        for (i, &p) in positions.iter().enumerate() {
            if p >= grid.len() || std::mem::replace(&mut used[p], true) {
                return Err(Error::invalid("layout positions must be distinct grid keys"));
            }
            let pos = grid.position(p);
            keys.push(KeyAssignment {
                char: Symbol::from_index(i).expect("alphabet index"),
                row: pos.row,
                col: pos.col,
                cx: pos.center_x,
                cy: pos.center_y,
            });
        }
        Ok(KeyboardLayout {
            kind,
            grid,
            keys,
            provenance,
        })
    }

    pub fn grid(&self) -> &HexGrid {
        &self.grid
    }

    pub fn keys(&self) -> &[KeyAssignment] {
        &self.keys
    }

    pub fn position_of(&self, symbol: Symbol) -> &KeyPosition {
        self.grid.position(self.index_of(symbol))
    }

    /// Grid index of the key carrying `symbol`.
    pub fn index_of(&self, symbol: Symbol) -> usize {
        let k = &self.keys[symbol.index()];
        self.grid.index_of(k.row, k.col).expect("validated on construction")
    }

    pub fn symbol_at(&self, grid_index: usize) -> Option<Symbol> {
        let p = self.grid.position(grid_index);
        self.keys
            .iter()
            .find(|k| k.row == p.row && k.col == p.col)
            .map(|k| k.char)
    }

    /// Grid indices in symbol order.
    pub fn mapping(&self) -> Vec<usize> {
        Symbol::all().map(|s| self.index_of(s)).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("layout serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Hex digest of a model's compact JSON form.
pub fn model_digest(model: &DirectionalFittsModel) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(model).expect("model serializes")))
}

fn digraph_digest(digraphs: &DigraphMatrix) -> String {
    hex::encode(Sha256::digest(
        serde_json::to_vec(digraphs).expect("digraphs serialize"),
    ))
}

/// Predicted movement time between every ordered pair of grid keys.
pub fn build_cost_matrix(model: &DirectionalFittsModel, grid: &HexGrid) -> Result<Array2<f64>> {
    model.validate()?;
    let m = grid.len();
    let mut cost = Array2::zeros((m, m));
    for (p, from) in grid.positions().iter().enumerate() {
        for (q, to) in grid.positions().iter().enumerate() {
            cost[[p, q]] = if p == q {
                model.mean_intercept.max(0.0)
            } else {
                predict_mt(model, Some(angle_deg(from, to)?), distance_px(from, to))?
            };
        }
    }
    Ok(cost)
}

/// Places the 27 symbols on `grid` by solving the digraph-weighted QAP.
///
/// `model` is required for personalized layouts; generic layouts always use
/// the population constants.
pub fn generate_layout(
    kind: LayoutKind,
    model: Option<&DirectionalFittsModel>,
    digraphs: &DigraphMatrix,
    grid: &HexGrid,
    params: &FaqParams,
) -> Result<KeyboardLayout> {
    let generic;
    let (model, model_sha256) = match (kind, model) {
        (LayoutKind::Personalized, Some(m)) => (m, Some(model_digest(m))),
        (LayoutKind::Personalized, None) => return Err(Error::invalid("a personalized layout needs a movement model")),
        (LayoutKind::Generic, _) => {
            generic = generic_model(grid.key_width());
            (&generic, None)
        }
        (LayoutKind::Qwerty, _) => return Err(Error::invalid("QWERTY is fixed, not optimized")),
    };
    if grid.len() < ALPHABET_LEN {
        return Err(Error::invalid(format!(
            "grid has {} keys, need {ALPHABET_LEN}",
            grid.len()
        )));
    }
    let p = joint_probabilities(digraphs)?;
    let flow = Array2::from_shape_fn((ALPHABET_LEN, ALPHABET_LEN), |(i, j)| p[i][j]);
    let instance = QapInstance::new(flow, build_cost_matrix(model, grid)?)?;
    let Assignment { mapping, objective } = solve_faq(&instance, params)?;
    let provenance = Provenance {
        model_sha256,
        digraphs_sha256: Some(digraph_digest(digraphs)),
        solver: Some(*params),
        objective: Some(objective),
        flipped: false,
    };
    KeyboardLayout::from_positions(kind, grid.clone(), &mapping, provenance)
}

const QWERTY_ROWS: [&str; 3] = ["QWERTYUIOP", "ASDFGHJKL", "ZXCVBNM "];

/// QWERTY on its own 3 × 10 honeycomb, space the size of a letter key and
/// right of `M`.
///
/// Odd rows sit half a key right, so starting the bottom row one column in
/// reproduces the familiar stagger: A half a key right of Q, Z half a key
/// right of A.
pub fn qwerty_layout(key_width: f64) -> Result<KeyboardLayout> {
    let grid = build_grid(3, 10, key_width)?;
    let mut positions = vec![0; ALPHABET_LEN];
    for (row, letters) in QWERTY_ROWS.iter().enumerate() {
        let first_col = if row == 2 { 1 } else { 0 };
        for (i, c) in letters.chars().enumerate() {
            let sym = Symbol::from_char(c).expect("alphabet char");
            positions[sym.index()] = grid.index_of(row, first_col + i).expect("fits the grid");
        }
    }
    KeyboardLayout::from_positions(LayoutKind::Qwerty, grid, &positions, Provenance::default())
}

/// Mirrors the layout top-to-bottom: row `r` moves to `rows − 1 − r`, same column.
pub fn flip_vertical(layout: &KeyboardLayout) -> KeyboardLayout {
    let grid = layout.grid.clone();
    let positions: Vec<usize> = layout
        .keys
        .iter()
        .map(|k| grid.index_of(grid.rows() - 1 - k.row, k.col).expect("same shape"))
        .collect();
    let mut provenance = layout.provenance.clone();
    provenance.flipped = !provenance.flipped;
    KeyboardLayout::from_positions(layout.kind, grid, &positions, provenance).expect("flip preserves validity")
}

/// Expected movement time per keystroke, `Σ p_ij · MT(pos_i → pos_j)`.
pub fn fitts_digraph_energy(
    layout: &KeyboardLayout,
    digraphs: &DigraphMatrix,
    model: &DirectionalFittsModel,
) -> Result<f64> {
    model.validate()?;
    let p = joint_probabilities(digraphs)?;
    let mut energy = 0.0;
    for a in Symbol::all() {
        for b in Symbol::all() {
            let w = p[a.index()][b.index()];
            if w == 0.0 {
                continue;
            }
            let (from, to) = (layout.position_of(a), layout.position_of(b));
            let d = distance_px(from, to);
            let angle = if d > 0.0 { Some(angle_deg(from, to)?) } else { None };
            energy += w * predict_mt(model, angle, d)?;
        }
    }
    Ok(energy)
}
