use proptest::prelude::*;

use super::*;
use crate::world::Item;

fn record(desc: &str, idx: u32) -> PerformerRecord {
    PerformerRecord {
        description: desc.to_string(),
        position_index: idx,
        sequence: vec![ActionStep::Find { object: "tree".into() }],
        situation: Situation::default(),
    }
}

/// Brute-force cosine distance from raw token counts, independent of `embed`.
fn oracle_distance(a: &str, b: &str) -> f64 {
    let hist = |t: &str| {
        let mut v = vec![0f64; EMBEDDING_DIM];
        for tok in tokens(t) {
            v[token_bin(&tok)] += 1.0;
        }
        v
    };
    let (va, vb) = (hist(a), hist(b));
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

#[test]
fn embedding_is_deterministic_and_unit() {
    let a = embed("craft wooden pickaxe").unwrap();
    let b = embed("craft wooden pickaxe").unwrap();
    assert_eq!(a, b);
    assert!((a.norm() - 1.0).abs() < 1e-9);
    assert!(distance(&a, &b) < 1e-12);
}

#[test]
fn empty_text_is_an_error() {
    assert!(matches!(embed(""), Err(MemoryError::EmptyText)));
    assert!(matches!(embed(" ,.; "), Err(MemoryError::EmptyText)));
}

#[test]
fn disjoint_bins_are_distance_one() {
    let (a, b) = ("furnace", "pig");
    assert_ne!(token_bin(a), token_bin(b));
    let d = distance(&embed(a).unwrap(), &embed(b).unwrap());
    assert!((d - 1.0).abs() < 1e-12);
}

#[test]
fn punctuation_and_case_are_ignored() {
    let a = embed("Craft, Wooden_Pickaxe!").unwrap();
    let b = embed("craft wooden pickaxe").unwrap();
    assert!(distance(&a, &b) < 1e-12);
}

#[test]
fn identical_fact_is_a_hit() {
    let mut s = KnowledgeStore::default();
    s.push(KnowledgeEntry::new("torch light keeps mobs away", KnowledgeSource::Curated).unwrap());
    match s.lookup("torch light keeps mobs away") {
        Lookup::Hit { entry, distance } => {
            assert_eq!(entry.text, "torch light keeps mobs away");
            assert!(distance < 1e-12);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn far_query_is_a_miss() {
    let mut s = KnowledgeStore::default();
    s.push(KnowledgeEntry::new("iron ore depth: below y 32", KnowledgeSource::Curated).unwrap());
    match s.lookup("iron ore depth for caves") {
        Lookup::Miss { nearest: Some(d) } => assert!(d >= KNOWLEDGE_THRESHOLD),
        other => panic!("{other:?}"),
    }
    assert_eq!(KnowledgeStore::default().lookup("anything"), Lookup::Miss { nearest: None });
}

#[test]
fn threshold_is_strict() {
    let mut s = KnowledgeStore::default();
    s.push(KnowledgeEntry::new("a b c d e f g h i j k l m n o p q r s t", KnowledgeSource::Curated).unwrap());
    let q = "a b c d e f g h i j k l m n o p q r s t u";
    let d = oracle_distance(q, "a b c d e f g h i j k l m n o p q r s t");
    assert!(d > 0.0);
    let computed = distance(&embed(q).unwrap(), s.entries()[0].embedding());
    s.threshold = computed;
    assert!(matches!(s.lookup(q), Lookup::Miss { .. }));
    s.threshold = computed + 1e-12;
    assert!(matches!(s.lookup(q), Lookup::Hit { .. }));
}

#[test]
fn recipe_query_finds_the_recipe_fact() {
    let book = RecipeBook::standard();
    let store = KnowledgeStore::standard(&book);
    let q = "craft wooden pickaxe recipe";
    // Exhaustive nearest-neighbor scan over topic keys.
    let best = store
        .entries()
        .iter()
        .min_by(|a, b| oracle_distance(q, a.topic()).total_cmp(&oracle_distance(q, b.topic())))
        .unwrap();
    assert!(best.text.starts_with("craft wooden pickaxe recipe"));
    match store.lookup(q) {
        Lookup::Hit { entry, .. } => assert_eq!(entry.text, best.text),
        other => panic!("{other:?}"),
    }
    assert!(best.text.contains("3 planks"));
    assert!(best.text.contains("crafting table"));
}

#[test]
fn standard_store_covers_every_recipe() {
    let book = RecipeBook::standard();
    let store = KnowledgeStore::standard(&book);
    let recipes = store
        .entries()
        .iter()
        .filter(|e| e.source == KnowledgeSource::RecipeBook)
        .count();
    assert_eq!(recipes, book.recipes().count());
    assert!(store.entries().iter().any(|e| e.source == KnowledgeSource::Curated));
}

#[test]
fn supplement_after_miss() {
    let mut s = KnowledgeStore::standard(&RecipeBook::standard());
    let q = "where do pigs sleep";
    assert!(matches!(s.lookup(q), Lookup::Miss { .. }));
    s.supplement("where do pigs sleep: anywhere on grass").unwrap();
    match s.lookup(q) {
        Lookup::Hit { entry, .. } => assert_eq!(entry.source, KnowledgeSource::Supplement),
        other => panic!("{other:?}"),
    }
}

#[test]
fn facts_file_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("facts.jsonl");
    fs::write(&p, "{\"text\": \"ok fact\"}\n\n{\"text\": 3}\n").unwrap();
    let mut s = KnowledgeStore::default();
    match s.load_facts(&p) {
        Err(MemoryError::Corrupt { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_record_store() {
    let mut s = PerformerStore::new();
    s.insert(record("craft stick", 4)).unwrap();
    let got = s.retrieve("mine diamond");
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].description, "craft stick");
}

#[test]
fn exact_description_ranks_first() {
    let mut s = PerformerStore::new();
    for (i, d) in ["mine log", "craft planks", "craft stick", "craft crafting table", "craft wooden pickaxe"]
        .iter()
        .enumerate()
    {
        s.insert(record(d, i as u32)).unwrap();
    }
    let got = s.retrieve("craft stick");
    assert_eq!(got.len(), 2);
    assert_eq!(got[0].description, "craft stick");
}

#[test]
fn equal_distance_prefers_low_position() {
    let mut s = PerformerStore::new();
    s.insert(record("smelt glass", 9)).unwrap();
    s.insert(record("smelt glass", 2)).unwrap();
    s.insert(record("smelt glass", 5)).unwrap();
    let got: Vec<u32> = s.retrieve("smelt glass").iter().map(|r| r.position_index).collect();
    assert_eq!(got, vec![2, 5]);
}

#[test]
fn persisted_keys_are_position_indices() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = PerformerStore::new();
    s.insert(record("mine log", 0)).unwrap();
    s.insert(record("craft planks", 12)).unwrap();
    s.persist(dir.path()).unwrap();
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(PERFORMER_DOC)).unwrap()).unwrap();
    let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
    assert_eq!(keys, vec!["0", "12"]);
}

#[test]
fn missing_store_loads_empty() {
    let dir = tempfile::tempdir().unwrap();
    let s = PerformerStore::load(&dir.path().join("nope")).unwrap();
    assert!(s.is_empty());
}

#[test]
fn corrupt_index_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = PerformerStore::new();
    s.insert(record("mine log", 0)).unwrap();
    s.insert(record("craft planks", 1)).unwrap();
    s.persist(dir.path()).unwrap();
    let idx = dir.path().join(PERFORMER_INDEX);
    let text = fs::read_to_string(&idx).unwrap();
    let first = text.lines().next().unwrap().to_string();
    fs::write(&idx, format!("{first}\nnot json\n")).unwrap();
    match PerformerStore::load(dir.path()) {
        Err(MemoryError::Corrupt { line, path, .. }) => {
            assert_eq!(line, 2);
            assert!(path.ends_with(PERFORMER_INDEX));
        }
        other => panic!("{other:?}"),
    }
    fs::write(dir.path().join(PERFORMER_DOC), "{\n  \"0\": [\n  oops\n}").unwrap();
    match PerformerStore::load(dir.path()) {
        Err(MemoryError::Corrupt { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

const VOCAB: &[&str] = &[
    "mine", "craft", "smelt", "log", "planks", "stick", "table", "wooden", "stone", "iron", "pickaxe", "furnace",
    "glass", "sand", "diamond", "ingot",
];

fn arb_text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB), 1..5).prop_map(|w| w.join(" "))
}

/// Exhaustive scan with the documented tie rule: distance, then position index,
/// then insertion order.
fn oracle_top2(store: &[(String, u32)], q: &str) -> Vec<(String, u32)> {
    let mut scored: Vec<(f64, u32, usize)> = store
        .iter()
        .enumerate()
        .map(|(i, (d, p))| (distance(&embed(q).unwrap(), &embed(d).unwrap()), *p, i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    scored.into_iter().take(2).map(|(_, _, i)| store[i].clone()).collect()
}

proptest! {
    #[test]
    fn distance_symmetric_and_bounded(a in arb_text(), b in arb_text()) {
        let (ea, eb) = (embed(&a).unwrap(), embed(&b).unwrap());
        let d = distance(&ea, &eb);
        prop_assert!((d - distance(&eb, &ea)).abs() < 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - oracle_distance(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn lookup_hit_iff_below_threshold(facts in prop::collection::vec(arb_text(), 1..8), q in arb_text()) {
        let mut s = KnowledgeStore::default();
        for f in &facts {
            s.push(KnowledgeEntry::new(f.clone(), KnowledgeSource::Curated).unwrap());
        }
        let qe = embed(&q).unwrap();
        let min = s.entries().iter().map(|e| distance(&qe, e.embedding())).fold(f64::INFINITY, f64::min);
        match s.lookup(&q) {
            Lookup::Hit { distance, .. } => {
                prop_assert!(min < KNOWLEDGE_THRESHOLD);
                prop_assert_eq!(distance, min);
            }
            Lookup::Miss { nearest } => {
                prop_assert!(min >= KNOWLEDGE_THRESHOLD);
                prop_assert_eq!(nearest, Some(min));
            }
        }
    }

    #[test]
    fn retrieval_matches_oracle_and_survives_reload(
        entries in prop::collection::vec((arb_text(), 0u32..6), 0..10),
        queries in prop::collection::vec(arb_text(), 1..6),
    ) {
        let mut s = PerformerStore::new();
        for (d, p) in &entries {
            s.insert(record(d, *p)).unwrap();
        }
        // The store groups by position index; replicate that order for the oracle.
        let mut ordered = entries.clone();
        ordered.sort_by_key(|(_, p)| *p);
        let dir = tempfile::tempdir().unwrap();
        s.persist(dir.path()).unwrap();
        let loaded = PerformerStore::load(dir.path()).unwrap();
        for q in &queries {
            let got: Vec<(String, u32)> = s.retrieve(q).iter().map(|r| (r.description.clone(), r.position_index)).collect();
            prop_assert_eq!(&got, &oracle_top2(&ordered, q));
            let again: Vec<&PerformerRecord> = loaded.retrieve(q);
            let mine: Vec<&PerformerRecord> = s.retrieve(q);
            prop_assert_eq!(again, mine);
        }
    }
}

#[test]
fn situation_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = PerformerStore::new();
    let mut r = record("craft stick", 3);
    r.situation.inventory.add(&Item::new("planks"), 2);
    r.situation.scene = "plains day sunny".into();
    s.insert(r.clone()).unwrap();
    s.persist(dir.path()).unwrap();
    let loaded = PerformerStore::load(dir.path()).unwrap();
    assert_eq!(loaded.records(), &[r]);
}
