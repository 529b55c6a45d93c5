//! Rank-based placement of nine thumbnails on the 3×3 grid.
//!
//! Positions are numbered P1..P9 in reading order, P5 is the center.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Scalar;
use crate::scoring::ScoreTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridPosition(u8);

impl GridPosition {
    pub const CENTER: GridPosition = GridPosition(5);
    pub const CORNERS: [GridPosition; 4] = [
        GridPosition(1),
        GridPosition(3),
        GridPosition(7),
        GridPosition(9),
    ];
    pub const EDGES: [GridPosition; 4] = [
        GridPosition(2),
        GridPosition(4),
        GridPosition(6),
        GridPosition(8),
    ];

    pub fn new(index: u8) -> Result<Self> {
        if (1..=9).contains(&index) {
            Ok(GridPosition(index))
        } else {
            Err(Error::InvalidInput(format!(
                "grid position {index} not in 1..=9"
            )))
        }
    }

    pub fn all() -> impl Iterator<Item = GridPosition> {
        (1..=9).map(GridPosition)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn row(self) -> u32 {
        (self.0 as u32 - 1) / 3
    }

    pub fn col(self) -> u32 {
        (self.0 as u32 - 1) % 3
    }

    pub fn is_corner(self) -> bool {
        Self::CORNERS.contains(&self)
    }

    pub fn is_edge(self) -> bool {
        Self::EDGES.contains(&self)
    }
}

impl fmt::Display for GridPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl FromStr for GridPosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('P')
            .and_then(|d| d.parse::<u8>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("bad grid position `{s}`")))
            .and_then(GridPosition::new)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Sequential,
    #[serde(rename = "center")]
    CenterPriority,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Sequential, Strategy::CenterPriority];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Sequential => "sequential",
            Strategy::CenterPriority => "center",
        }
    }

    /// Grid position of each rank, best first.
    pub fn fill_order(self) -> [GridPosition; 9] {
        let idx: [u8; 9] = match self {
            Strategy::Sequential => [1, 2, 3, 4, 5, 6, 7, 8, 9],
            Strategy::CenterPriority => [5, 1, 3, 7, 9, 2, 4, 6, 8],
        };
        idx.map(GridPosition)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Strategy::Sequential),
            "center" => Ok(Strategy::CenterPriority),
            _ => Err(Error::InvalidInput(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Which score family a layout was ranked by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerRole {
    Aesthetic,
    Content,
}

impl ScorerRole {
    pub const ALL: [ScorerRole; 2] = [ScorerRole::Aesthetic, ScorerRole::Content];

    pub fn as_str(self) -> &'static str {
        match self {
            ScorerRole::Aesthetic => "aesthetic",
            ScorerRole::Content => "content",
        }
    }
}

impl fmt::Display for ScorerRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the four study variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariantKey {
    pub scorer: ScorerRole,
    pub strategy: Strategy,
}

impl VariantKey {
    pub const ALL: [VariantKey; 4] = [
        VariantKey::new(ScorerRole::Aesthetic, Strategy::Sequential),
        VariantKey::new(ScorerRole::Aesthetic, Strategy::CenterPriority),
        VariantKey::new(ScorerRole::Content, Strategy::Sequential),
        VariantKey::new(ScorerRole::Content, Strategy::CenterPriority),
    ];

    pub const fn new(scorer: ScorerRole, strategy: Strategy) -> Self {
        VariantKey { scorer, strategy }
    }
}

impl fmt::Display for VariantKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scorer, self.strategy)
    }
}

/// Image ids from best to worst.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub set_id: String,
    pub scorer_id: String,
    pub ordered_ids: Vec<String>,
    /// Groups of ids that shared a score, listed in the order they were kept.
    pub tie_groups: Vec<Vec<String>>,
}

/// Stable descending sort by score; ties keep input order.
pub fn rank_images<T: Scalar>(table: &ScoreTable<T>, input_order: &[String]) -> Result<Ranking> {
    table.validate(input_order)?;
    let mut entries: Vec<(&String, T)> = input_order
        .iter()
        .map(|id| (id, table.scores[id]))
        .collect();
    // Scores are finite, so partial_cmp never fails.
    entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));

    let mut tie_groups = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        let j = i + entries[i..]
            .iter()
            .take_while(|e| e.1 == entries[i].1)
            .count();
        if j - i > 1 {
            tie_groups.push(entries[i..j].iter().map(|e| e.0.clone()).collect());
        }
        i = j;
    }

    Ok(Ranking {
        set_id: table.set_id.clone(),
        scorer_id: table.scorer_id.clone(),
        ordered_ids: entries.into_iter().map(|e| e.0.clone()).collect(),
        tie_groups,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub set_id: String,
    pub scorer_id: String,
    pub strategy: Strategy,
    /// `placement[k]` sits at position P(k+1).
    #[serde(with = "placement_map")]
    pub placement: [String; 9],
}

impl GridLayout {
    pub fn at(&self, pos: GridPosition) -> &str {
        &self.placement[pos.index() as usize - 1]
    }

    pub fn position_of(&self, id: &str) -> Option<GridPosition> {
        self.placement
            .iter()
            .position(|p| p == id)
            .map(|k| GridPosition(k as u8 + 1))
    }

    pub fn file_name(&self) -> String {
        layout_file_name(&self.scorer_id, self.strategy)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        io::write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(dir: &Path, scorer_id: &str, strategy: Strategy) -> Result<Self> {
        let path = dir.join(layout_file_name(scorer_id, strategy));
        if !path.exists() {
            return Err(Error::NotFound(format!("{}", path.display())));
        }
        let layout: GridLayout = io::read_json(&path)?;
        layout.check_bijection()?;
        Ok(layout)
    }

    fn check_bijection(&self) -> Result<()> {
        let distinct: HashSet<&String> = self.placement.iter().collect();
        if distinct.len() != 9 {
            return Err(Error::InvalidInput(format!(
                "layout for `{}` repeats an image",
                self.set_id
            )));
        }
        Ok(())
    }
}

pub fn layout_file_name(scorer_id: &str, strategy: Strategy) -> String {
    format!("layout.{scorer_id}.{strategy}.json")
}

mod placement_map {
    use super::*;

    pub fn serialize<S: Serializer>(p: &[String; 9], s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, &String> = p
            .iter()
            .enumerate()
            .map(|(k, id)| (format!("P{}", k + 1), id))
            .collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<[String; 9], D::Error> {
        use serde::de::Error as _;
        let map = BTreeMap::<String, String>::deserialize(d)?;
        let mut out: [String; 9] = Default::default();
        let mut seen = [false; 9];
        for (key, id) in map {
            let pos: GridPosition = key.parse().map_err(D::Error::custom)?;
            let k = pos.index() as usize - 1;
            out[k] = id;
            seen[k] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(D::Error::custom(format!("placement lacks P{}", k + 1)));
        }
        Ok(out)
    }
}

pub fn arrange(r: &Ranking, strategy: Strategy) -> Result<GridLayout> {
    if r.ordered_ids.len() != 9 {
        return Err(Error::SetSize {
            found: r.ordered_ids.len(),
        });
    }
    let mut placement: [String; 9] = Default::default();
    for (id, pos) in r.ordered_ids.iter().zip(strategy.fill_order()) {
        placement[pos.index() as usize - 1] = id.clone();
    }
    let layout = GridLayout {
        set_id: r.set_id.clone(),
        scorer_id: r.scorer_id.clone(),
        strategy,
        placement,
    };
    layout.check_bijection()?;
    Ok(layout)
}

/// Best at P1, then reading order down to P9.
pub fn arrange_sequential(r: &Ranking) -> Result<GridLayout> {
    arrange(r, Strategy::Sequential)
}

/// Best at P5, ranks 2–5 on P1, P3, P7, P9, ranks 6–9 on P2, P4, P6, P8.
pub fn arrange_center(r: &Ranking) -> Result<GridLayout> {
    arrange(r, Strategy::CenterPriority)
}

/// Layouts for both score families under both strategies.
pub fn build_four_layouts<T: Scalar>(
    aesthetic: &ScoreTable<T>,
    content: &ScoreTable<T>,
    input_order: &[String],
) -> Result<Vec<(VariantKey, GridLayout)>> {
    let a_ids: HashSet<&String> = aesthetic.scores.keys().collect();
    let c_ids: HashSet<&String> = content.scores.keys().collect();
    if a_ids != c_ids {
        return Err(Error::SetMismatch(format!(
            "`{}` and `{}` score different images",
            aesthetic.scorer_id, content.scorer_id
        )));
    }
    if aesthetic.set_id != content.set_id {
        return Err(Error::SetMismatch(format!(
            "tables belong to sets `{}` and `{}`",
            aesthetic.set_id, content.set_id
        )));
    }
    let mut out = Vec::with_capacity(4);
    for (role, table) in [
        (ScorerRole::Aesthetic, aesthetic),
        (ScorerRole::Content, content),
    ] {
        let ranking = rank_images(table, input_order)?;
        for strategy in Strategy::ALL {
            out.push((
                VariantKey::new(role, strategy),
                arrange(&ranking, strategy)?,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, Just};
    use proptest::strategy::Strategy as _;

    fn ids(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| ((b'A' + i as u8) as char).to_string())
            .collect()
    }

    fn table(scores: &[f64]) -> ScoreTable<f64> {
        let ids = ids(scores.len());
        ScoreTable::new(
            "s",
            "set",
            ids.iter().cloned().zip(scores.iter().copied()),
            &ids,
        )
        .unwrap()
    }

    fn ranking_a_to_i() -> Ranking {
        Ranking {
            set_id: "set".into(),
            scorer_id: "s".into(),
            ordered_ids: ids(9),
            tie_groups: vec![],
        }
    }

    #[test]
    fn positions() {
        let p = |i| GridPosition::new(i).unwrap();
        assert_eq!((p(1).row(), p(1).col()), (0, 0));
        assert_eq!((p(5).row(), p(5).col()), (1, 1));
        assert_eq!((p(9).row(), p(9).col()), (2, 2));
        assert_eq!((p(6).row(), p(6).col()), (1, 2));
        assert!(p(3).is_corner() && p(8).is_edge() && !p(5).is_corner() && !p(5).is_edge());
        assert!(GridPosition::new(0).is_err() && GridPosition::new(10).is_err());
        assert_eq!("P7".parse::<GridPosition>().unwrap(), p(7));
    }

    #[test]
    fn miniature_comparator() {
        let t = table(&[3.0, 1.0, 2.0]);
        let r = rank_images(&t, &ids(3)).unwrap();
        assert_eq!(r.ordered_ids, vec!["A", "C", "B"]);
    }

    #[test]
    fn all_equal_keeps_input_order() {
        let t = table(&[0.5; 9]);
        let mut order = ids(9);
        order.reverse();
        let r = rank_images(&t, &order).unwrap();
        assert_eq!(r.ordered_ids, order);
        assert_eq!(r.tie_groups, vec![order.clone()]);
    }

    #[test]
    fn incomplete_table_rejected() {
        let mut t = table(&[1.0; 9]);
        t.scores.remove("E");
        assert!(matches!(
            rank_images(&t, &ids(9)).unwrap_err(),
            Error::IncompleteScores { .. }
        ));
    }

    #[test]
    fn sequential_example() {
        let l = arrange_sequential(&ranking_a_to_i()).unwrap();
        assert_eq!(
            l.placement,
            ["A", "B", "C", "D", "E", "F", "G", "H", "I"].map(String::from)
        );
    }

    #[test]
    fn center_example() {
        let l = arrange_center(&ranking_a_to_i()).unwrap();
        // P1..P9
        assert_eq!(
            l.placement,
            ["B", "F", "C", "G", "A", "H", "D", "I", "E"].map(String::from)
        );
        assert_eq!(l.at(GridPosition::CENTER), "A");
    }

    #[test]
    fn four_layouts() {
        let a = table(&[9., 8., 7., 6., 5., 4., 3., 2., 1.]);
        let same = build_four_layouts(&a, &a, &ids(9)).unwrap();
        assert_eq!(same.len(), 4);
        assert_eq!(same[0].1.placement, same[2].1.placement);
        assert_eq!(same[1].1.placement, same[3].1.placement);
        let keys: HashSet<_> = same.iter().map(|(k, _)| *k).collect();
        assert_eq!(keys.len(), 4);

        let c = table(&[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let rev = build_four_layouts(&a, &c, &ids(9)).unwrap();
        let mut reversed = rev[2].1.placement.clone();
        reversed.reverse();
        assert_eq!(rev[0].1.placement, reversed);

        let mut other = c.clone();
        other.scores.remove("A");
        other.scores.insert("Z".into(), 0.0);
        assert!(matches!(
            build_four_layouts(&a, &other, &ids(9)).unwrap_err(),
            Error::SetMismatch(_)
        ));
    }

    #[test]
    fn layout_json_shape() {
        let l = arrange_center(&ranking_a_to_i()).unwrap();
        let v = serde_json::to_value(&l).unwrap();
        assert_eq!(v["strategy"], "center");
        assert_eq!(v["placement"]["P5"], "A");
        assert_eq!(v["placement"]["P1"], "B");
        let back: GridLayout = serde_json::from_value(v).unwrap();
        assert_eq!(back, l);
        assert_eq!(l.file_name(), "layout.s.center.json");
    }

    proptest! {
        #[test]
        fn layouts_are_bijections(scores in proptest::collection::vec(-5.0f64..5.0, 9)) {
            let t = table(&scores);
            let r = rank_images(&t, &ids(9)).unwrap();
            for s in Strategy::ALL {
                let l = arrange(&r, s).unwrap();
                let set: HashSet<_> = l.placement.iter().collect();
                prop_assert_eq!(set.len(), 9);
            }
            let seq = arrange_sequential(&r).unwrap();
            let cen = arrange_center(&r).unwrap();
            prop_assert_eq!(seq.at(GridPosition::new(1).unwrap()), r.ordered_ids[0].as_str());
            prop_assert_eq!(cen.at(GridPosition::CENTER), r.ordered_ids[0].as_str());
            for (rank, id) in r.ordered_ids.iter().enumerate().skip(1) {
                let pos = cen.position_of(id).unwrap();
                prop_assert_eq!(pos.is_corner(), rank <= 4);
                prop_assert_eq!(pos.is_edge(), rank >= 5);
            }
        }

        #[test]
        fn scores_non_increasing_along_ranking(scores in proptest::collection::vec(-3i32..3, 9)) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let t = table(&scores);
            let order = ids(9);
            let r = rank_images(&t, &order).unwrap();
            for w in r.ordered_ids.windows(2) {
                let (a, b) = (t.scores[&w[0]], t.scores[&w[1]]);
                prop_assert!(a >= b);
                if a == b {
                    let ia = order.iter().position(|x| x == &w[0]).unwrap();
                    let ib = order.iter().position(|x| x == &w[1]).unwrap();
                    prop_assert!(ia < ib);
                }
            }
        }

        #[test]
        fn input_permutation_invariance(
            scores in proptest::collection::hash_set(-1000i32..1000, 9),
            perm in Just((0..9).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let t = table(&scores);
            let order = ids(9);
            let shuffled: Vec<String> = perm.iter().map(|&i| order[i].clone()).collect();
            for s in Strategy::ALL {
                let a = arrange(&rank_images(&t, &order).unwrap(), s).unwrap();
                let b = arrange(&rank_images(&t, &shuffled).unwrap(), s).unwrap();
                prop_assert_eq!(a.placement, b.placement);
            }
        }
    }
}
