//! Ontological knowledge bases: a TBox of concept subsumptions and an ABox
//! of relation triples plus entity-concept instantiation links.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub fn from_index(i: usize) -> Self {
                $name(i as u32)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(EntityId);
id_type!(ConceptId);
id_type!(RelationId);

/// Name of the synthetic relation introduced by [`degrade_concepts`].
pub const INSTANCE_OF: &str = "isInstanceOf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, rel: RelationId, tail: EntityId) -> Self {
        Triple { head, rel, tail }
    }
}

/// Dense integer ids for the three name spaces.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    entities: Vec<String>,
    concepts: Vec<String>,
    relations: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    concept_ids: HashMap<String, ConceptId>,
    relation_ids: HashMap<String, RelationId>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    entities: Vec<String>,
    concepts: Vec<String>,
    relations: Vec<String>,
}

fn index_names<T>(names: &[String], kind: &'static str, mk: fn(usize) -> T) -> Result<HashMap<String, T>> {
    let mut map = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.clone(), mk(i)).is_some() {
            return Err(Error::Invalid(format!("duplicate {kind} name `{n}` in vocabulary")));
        }
    }
    Ok(map)
}

impl Vocab {
    /// Builds a vocabulary from ordered name lists, rejecting duplicates and
    /// names shared between namespaces.
    pub fn new(entities: Vec<String>, concepts: Vec<String>, relations: Vec<String>) -> Result<Self> {
        let entity_ids = index_names(&entities, "entity", EntityId::from_index)?;
        let concept_ids = index_names(&concepts, "concept", ConceptId::from_index)?;
        let relation_ids = index_names(&relations, "relation", RelationId::from_index)?;
        for c in &concepts {
            if entity_ids.contains_key(c) {
                return Err(collision(c, "entity", "concept"));
            }
        }
        for r in &relations {
            if entity_ids.contains_key(r) {
                return Err(collision(r, "entity", "relation"));
            }
            if concept_ids.contains_key(r) {
                return Err(collision(r, "concept", "relation"));
            }
        }
        Ok(Vocab {
            entities,
            concepts,
            relations,
            entity_ids,
            concept_ids,
            relation_ids,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn concept(&self, name: &str) -> Option<ConceptId> {
        self.concept_ids.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.index()]
    }

    pub fn concept_name(&self, id: ConceptId) -> &str {
        &self.concepts[id.index()]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()]
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            entities: self.entities.clone(),
            concepts: self.concepts.clone(),
            relations: self.relations.clone(),
        };
        serde_json::to_string_pretty(&file).expect("vocab serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabFile =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("vocab.json: {e}")))?;
        Vocab::new(file.entities, file.concepts, file.relations)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocab::from_json(&text)
    }
}

fn collision(name: &str, first: &'static str, second: &'static str) -> Error {
    Error::NamespaceCollision {
        name: name.to_string(),
        first,
        second,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub tbox: BTreeSet<(ConceptId, ConceptId)>,
    pub abox_ee: BTreeSet<Triple>,
    pub abox_ec: BTreeSet<(EntityId, ConceptId)>,
    pub vocab: Vocab,
}

/// Counts reported after loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KbStats {
    pub entities: usize,
    pub concepts: usize,
    pub relations: usize,
    pub subsumptions: usize,
    pub triples: usize,
    pub instantiations: usize,
}

impl KnowledgeBase {
    /// Builds a knowledge base from id-level axioms, validating bounds and
    /// dropping reflexive subsumptions.
    pub fn new(
        vocab: Vocab,
        tbox: impl IntoIterator<Item = (ConceptId, ConceptId)>,
        abox_ee: impl IntoIterator<Item = Triple>,
        abox_ec: impl IntoIterator<Item = (EntityId, ConceptId)>,
    ) -> Result<Self> {
        let (ne, nc, nr) = (vocab.num_entities(), vocab.num_concepts(), vocab.num_relations());
        let oob = |what: &str| Error::Invalid(format!("{what} id out of vocabulary bounds"));
        let tbox: BTreeSet<_> = tbox.into_iter().filter(|(a, b)| a != b).collect();
        if tbox.iter().any(|(a, b)| a.index() >= nc || b.index() >= nc) {
            return Err(oob("concept"));
        }
        let abox_ee: BTreeSet<_> = abox_ee.into_iter().collect();
        if abox_ee
            .iter()
            .any(|t| t.head.index() >= ne || t.tail.index() >= ne || t.rel.index() >= nr)
        {
            return Err(oob("triple"));
        }
        let abox_ec: BTreeSet<_> = abox_ec.into_iter().collect();
        if abox_ec.iter().any(|(e, c)| e.index() >= ne || c.index() >= nc) {
            return Err(oob("instantiation"));
        }
        Ok(KnowledgeBase {
            tbox,
            abox_ee,
            abox_ec,
            vocab,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.num_entities()
    }

    pub fn num_concepts(&self) -> usize {
        self.vocab.num_concepts()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }

    pub fn stats(&self) -> KbStats {
        KbStats {
            entities: self.num_entities(),
            concepts: self.num_concepts(),
            relations: self.num_relations(),
            subsumptions: self.tbox.len(),
            triples: self.abox_ee.len(),
            instantiations: self.abox_ec.len(),
        }
    }

    /// Instantiation links closed under the subsumption hierarchy:
    /// `e ◁ c` and `c ⊑ c'` imply `e ◁ c'`.
    pub fn instance_closure(&self) -> BTreeSet<(EntityId, ConceptId)> {
        let closure = transductive_closure(&self.tbox);
        let mut supers: Vec<Vec<ConceptId>> = vec![Vec::new(); self.num_concepts()];
        for &(a, b) in &closure {
            supers[a.index()].push(b);
        }
        let mut out = BTreeSet::new();
        for &(e, c) in &self.abox_ec {
            out.insert((e, c));
            for &s in &supers[c.index()] {
                out.insert((e, s));
            }
        }
        out
    }

    /// Writes the three TSV files into `dir` alongside `vocab.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.vocab.save(&dir.join("vocab.json"))?;
        let v = &self.vocab;
        write_lines(
            &dir.join("tbox.tsv"),
            self.tbox
                .iter()
                .map(|&(a, b)| format!("{}\t{}", v.concept_name(a), v.concept_name(b))),
        )?;
        write_triples(&dir.join("abox_ee.tsv"), v, &self.abox_ee)?;
        write_lines(
            &dir.join("abox_ec.tsv"),
            self.abox_ec
                .iter()
                .map(|&(e, c)| format!("{}\t{}", v.entity_name(e), v.concept_name(c))),
        )
    }

    /// Loads a directory written by [`KnowledgeBase::save`], pinning ids to
    /// the stored `vocab.json`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let vocab = Vocab::load(&dir.join("vocab.json"))?;
        load_kb_with_vocab(
            &dir.join("tbox.tsv"),
            &dir.join("abox_ee.tsv"),
            &dir.join("abox_ec.tsv"),
            vocab,
        )
    }
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_triples<'a>(
    path: &Path,
    vocab: &Vocab,
    triples: impl IntoIterator<Item = &'a Triple>,
) -> Result<()> {
    write_lines(
        path,
        triples.into_iter().map(|t| {
            format!(
                "{}\t{}\t{}",
                vocab.entity_name(t.head),
                vocab.relation_name(t.rel),
                vocab.entity_name(t.tail)
            )
        }),
    )
}

/// Reads a TSV file into rows of exactly `arity` fields, skipping blank and
/// `#` comment lines.
fn read_tsv(path: &Path, arity: usize) -> Result<Vec<Vec<String>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != arity || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                file: path.display().to_string(),
                line: i + 1,
                msg: format!("expected {arity} non-empty tab-separated fields, found {}", fields.len()),
            });
        }
        rows.push(fields);
    }
    Ok(rows)
}

/// Loads the three TSV files, building a vocabulary from every name seen.
///
/// Names are sorted within each namespace so ids do not depend on line order.
pub fn load_kb(tbox_path: &Path, abox_ee_path: &Path, abox_ec_path: &Path) -> Result<KnowledgeBase> {
    let tbox = read_tsv(tbox_path, 2)?;
    let ee = read_tsv(abox_ee_path, 3)?;
    let ec = read_tsv(abox_ec_path, 2)?;

    let mut entities = BTreeSet::new();
    let mut concepts = BTreeSet::new();
    let mut relations = BTreeSet::new();
    for r in &tbox {
        concepts.insert(r[0].clone());
        concepts.insert(r[1].clone());
    }
    for r in &ee {
        entities.insert(r[0].clone());
        relations.insert(r[1].clone());
        entities.insert(r[2].clone());
    }
    for r in &ec {
        entities.insert(r[0].clone());
        concepts.insert(r[1].clone());
    }
    let vocab = Vocab::new(
        entities.into_iter().collect(),
        concepts.into_iter().collect(),
        relations.into_iter().collect(),
    )?;
    let kb = build_from_rows(vocab, &tbox, &ee, &ec)?;
    let s = kb.stats();
    log::info!(
        "loaded kb: {} entities, {} concepts, {} relations, {} subsumptions, {} triples, {} instantiations",
        s.entities,
        s.concepts,
        s.relations,
        s.subsumptions,
        s.triples,
        s.instantiations
    );
    Ok(kb)
}

/// Loads TSV files against a fixed vocabulary; unknown names are errors.
pub fn load_kb_with_vocab(
    tbox_path: &Path,
    abox_ee_path: &Path,
    abox_ec_path: &Path,
    vocab: Vocab,
) -> Result<KnowledgeBase> {
    let tbox = read_tsv(tbox_path, 2)?;
    let ee = read_tsv(abox_ee_path, 3)?;
    let ec = read_tsv(abox_ec_path, 2)?;
    build_from_rows(vocab, &tbox, &ee, &ec)
}

pub(crate) fn load_triples(path: &Path, vocab: &Vocab) -> Result<BTreeSet<Triple>> {
    read_tsv(path, 3)?
        .iter()
        .map(|r| triple_from_row(vocab, r))
        .collect()
}

fn lookup<T>(found: Option<T>, kind: &'static str, name: &str) -> Result<T> {
    found.ok_or_else(|| Error::UnknownName {
        kind,
        name: name.to_string(),
    })
}

fn triple_from_row(v: &Vocab, r: &[String]) -> Result<Triple> {
    Ok(Triple::new(
        lookup(v.entity(&r[0]), "entity", &r[0])?,
        lookup(v.relation(&r[1]), "relation", &r[1])?,
        lookup(v.entity(&r[2]), "entity", &r[2])?,
    ))
}

fn build_from_rows(
    vocab: Vocab,
    tbox: &[Vec<String>],
    ee: &[Vec<String>],
    ec: &[Vec<String>],
) -> Result<KnowledgeBase> {
    let v = &vocab;
    let t = tbox
        .iter()
        .map(|r| {
            Ok((
                lookup(v.concept(&r[0]), "concept", &r[0])?,
                lookup(v.concept(&r[1]), "concept", &r[1])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let e = ee
        .iter()
        .map(|r| triple_from_row(v, r))
        .collect::<Result<Vec<_>>>()?;
    let c = ec
        .iter()
        .map(|r| {
            Ok((
                lookup(v.entity(&r[0]), "entity", &r[0])?,
                lookup(v.concept(&r[1]), "concept", &r[1])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    KnowledgeBase::new(vocab, t, e, c)
}

/// Iteratively removes entities whose degree over role assertions and
/// instantiation links is below `threshold`, until no such entity remains.
///
/// Entity and relation ids are rebuilt densely; concepts are kept.
pub fn filter_low_degree(kb: &KnowledgeBase, threshold: usize) -> Result<KnowledgeBase> {
    if threshold == 0 {
        return Ok(kb.clone());
    }
    let ne = kb.num_entities();
    let mut alive = vec![true; ne];
    let mut triples: Vec<Triple> = kb.abox_ee.iter().copied().collect();
    let mut links: Vec<(EntityId, ConceptId)> = kb.abox_ec.iter().copied().collect();
    loop {
        let mut degree = vec![0usize; ne];
        for t in &triples {
            degree[t.head.index()] += 1;
            degree[t.tail.index()] += 1;
        }
        for (e, _) in &links {
            degree[e.index()] += 1;
        }
        let mut removed = false;
        for (i, a) in alive.iter_mut().enumerate() {
            if *a && degree[i] < threshold {
                *a = false;
                removed = true;
            }
        }
        if !removed {
            break;
        }
        triples.retain(|t| alive[t.head.index()] && alive[t.tail.index()]);
        links.retain(|(e, _)| alive[e.index()]);
    }
    if !alive.iter().any(|&a| a) {
        return Err(Error::EmptyKb);
    }

    let mut entity_map = vec![None; ne];
    let mut entities = Vec::new();
    for (i, name) in kb.vocab.entities().iter().enumerate() {
        if alive[i] {
            entity_map[i] = Some(EntityId::from_index(entities.len()));
            entities.push(name.clone());
        }
    }
    let used: BTreeSet<RelationId> = triples.iter().map(|t| t.rel).collect();
    let mut rel_map = vec![None; kb.num_relations()];
    let mut relations = Vec::new();
    for r in used {
        rel_map[r.index()] = Some(RelationId::from_index(relations.len()));
        relations.push(kb.vocab.relation_name(r).to_string());
    }
    let vocab = Vocab::new(entities, kb.vocab.concepts().to_vec(), relations)?;
    let em = |e: EntityId| entity_map[e.index()].expect("surviving entity");
    let rm = |r: RelationId| rel_map[r.index()].expect("used relation");
    let removed = ne - vocab.num_entities();
    let out = KnowledgeBase::new(
        vocab,
        kb.tbox.iter().copied(),
        triples.iter().map(|t| Triple::new(em(t.head), rm(t.rel), em(t.tail))),
        links.iter().map(|&(e, c)| (em(e), c)),
    )?;
    log::info!("degree filter (threshold {threshold}) removed {removed} entities");
    Ok(out)
}

/// Training knowledge base plus held-out role assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbSplit {
    pub train: KnowledgeBase,
    pub valid: BTreeSet<Triple>,
    pub test: BTreeSet<Triple>,
}

impl KbSplit {
    /// The knowledge base with every held-out triple restored.
    pub fn full(&self) -> KnowledgeBase {
        let mut kb = self.train.clone();
        kb.abox_ee.extend(self.valid.iter().copied());
        kb.abox_ee.extend(self.test.iter().copied());
        kb
    }

    /// Train plus validation triples (the graph visible at validation time).
    pub fn train_valid(&self) -> KnowledgeBase {
        let mut kb = self.train.clone();
        kb.abox_ee.extend(self.valid.iter().copied());
        kb
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.train.save(dir)?;
        write_triples(&dir.join("valid.tsv"), &self.train.vocab, &self.valid)?;
        write_triples(&dir.join("test.tsv"), &self.train.vocab, &self.test)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let train = KnowledgeBase::load_dir(dir)?;
        let valid = load_triples(&dir.join("valid.tsv"), &train.vocab)?;
        let test = load_triples(&dir.join("test.tsv"), &train.vocab)?;
        Ok(KbSplit { train, valid, test })
    }
}

/// Splits role assertions uniformly at random: `train_fraction` for
/// training, the remainder halved into validation and test.
pub fn split_abox(kb: &KnowledgeBase, train_fraction: f64, seed: u64) -> Result<KbSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut triples: Vec<Triple> = kb.abox_ee.iter().copied().collect();
    let n = triples.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::EmptyPartition(format!(
            "{n} triples with fraction {train_fraction} give {n_train} for training"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    triples.shuffle(&mut rng);
    let held = &triples[n_train..];
    let n_valid = held.len() / 2;
    let mut train = kb.clone();
    train.abox_ee = triples[..n_train].iter().copied().collect();
    Ok(KbSplit {
        train,
        valid: held[..n_valid].iter().copied().collect(),
        test: held[n_valid..].iter().copied().collect(),
    })
}

/// Transitive closure of the subsumption relation without reflexive pairs.
///
/// Members of a subsumption cycle end up mutually subsuming; a warning is
/// logged when a cycle is found.
pub fn transductive_closure(tbox: &BTreeSet<(ConceptId, ConceptId)>) -> BTreeSet<(ConceptId, ConceptId)> {
    let mut succ: HashMap<ConceptId, Vec<ConceptId>> = HashMap::new();
    for &(a, b) in tbox {
        succ.entry(a).or_default().push(b);
    }
    let mut out = BTreeSet::new();
    let mut cyclic = false;
    for &start in succ.keys() {
        let mut seen = HashSet::new();
        let mut stack = succ[&start].clone();
        while let Some(c) = stack.pop() {
            if !seen.insert(c) {
                continue;
            }
            if c == start {
                cyclic = true;
            } else {
                out.insert((start, c));
            }
            if let Some(next) = succ.get(&c) {
                stack.extend(next.iter().copied());
            }
        }
    }
    if cyclic {
        log::warn!("subsumption cycle detected; cycle members are treated as equivalent");
    }
    out
}

/// The one-more-hop view of a knowledge base: every concept becomes an
/// entity and every (closure-augmented) instantiation becomes a triple
/// over a fresh [`INSTANCE_OF`] relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegradedKb {
    pub kb: KnowledgeBase,
    /// Number of entities in the source knowledge base. Concept `c` maps to
    /// entity `original_entities + c`.
    pub original_entities: usize,
    pub original_concepts: usize,
    pub instance_of: RelationId,
}

impl DegradedKb {
    pub fn concept_entity(&self, c: ConceptId) -> EntityId {
        EntityId::from_index(self.original_entities + c.index())
    }

    /// Inverse of [`DegradedKb::concept_entity`].
    pub fn entity_concept(&self, e: EntityId) -> Option<ConceptId> {
        let i = e.index().checked_sub(self.original_entities)?;
        (i < self.original_concepts).then(|| ConceptId::from_index(i))
    }
}

pub fn degrade_concepts(kb: &KnowledgeBase) -> Result<DegradedKb> {
    let ne = kb.num_entities();
    let mut entities = kb.vocab.entities().to_vec();
    entities.extend(kb.vocab.concepts().iter().cloned());
    let mut relations = kb.vocab.relations().to_vec();
    let instance_of = RelationId::from_index(relations.len());
    relations.push(INSTANCE_OF.to_string());
    let vocab = Vocab::new(entities, Vec::new(), relations)?;
    let mut triples = kb.abox_ee.clone();
    for (e, c) in kb.instance_closure() {
        triples.insert(Triple::new(e, instance_of, EntityId::from_index(ne + c.index())));
    }
    Ok(DegradedKb {
        kb: KnowledgeBase::new(vocab, [], triples, [])?,
        original_entities: ne,
        original_concepts: kb.num_concepts(),
        instance_of,
    })
}
