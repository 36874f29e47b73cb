use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::TextEmbedder;
use crate::textproc::{build_vocab, tokenize, Lexicon, Pos, Vocab, MIN_VOCAB_SIZE};

use super::{Example, Result, TrainError};

/// General names shared by groups of concepts. A target caption falls
/// back to the hypernym when the alt-text does not name a rare concept.
pub const HYPERNYMS: [&str; 6] = ["animal", "plant", "vehicle", "tool", "food", "building"];

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aeiou";

/// Parameters of the synthetic concept world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub n_concepts: usize,
    /// Share of concepts the image embedding never carries.
    pub rare_fraction: f64,
    pub concepts_per_image: usize,
    /// Probability that an alt-text names one concept absent from the image.
    pub distractor_rate: f64,
    pub embed_dim: usize,
    pub seed: u64,
    /// Probability that each true concept is named in the alt-text.
    pub alt_keep_prob: f64,
    /// Standard deviation of the per-dimension noise added before
    /// normalising the image embedding.
    pub noise: f64,
    /// Exponent of the Zipf weights used to pick image concepts.
    pub zipf_exponent: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            n_concepts: 40,
            rare_fraction: 0.3,
            concepts_per_image: 3,
            distractor_rate: 0.2,
            embed_dim: 32,
            seed: 0,
            alt_keep_prob: 0.9,
            noise: 0.05,
            zipf_exponent: 1.0,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.rare_fraction > 0.0 && self.rare_fraction < 1.0) {
            return bad(format!(
                "rare_fraction must be in (0, 1), got {}",
                self.rare_fraction
            ));
        }
        if self.concepts_per_image == 0 {
            return bad("concepts_per_image must be at least 1".into());
        }
        if self.concepts_per_image >= self.n_concepts {
            return bad(format!(
                "concepts_per_image {} must be below n_concepts {}",
                self.concepts_per_image, self.n_concepts
            ));
        }
        if !(0.0..=1.0).contains(&self.distractor_rate) {
            return bad(format!(
                "distractor_rate must be in [0, 1], got {}",
                self.distractor_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.alt_keep_prob) {
            return bad(format!(
                "alt_keep_prob must be in [0, 1], got {}",
                self.alt_keep_prob
            ));
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad(format!(
                "zipf_exponent must be >= 0, got {}",
                self.zipf_exponent
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub name: String,
    pub hypernym: usize,
    pub rare: bool,
    pub vector: Vec<f64>,
}

/// One generated image with its alt-text and canonical target caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldItem {
    pub id: String,
    /// Concept indices present in the image, ascending.
    pub concepts: Vec<usize>,
    pub image: Vec<f64>,
    pub alt_text: String,
    /// True concepts named in the alt-text, ascending.
    pub alt_concepts: Vec<usize>,
    pub distractor: Option<usize>,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub spec: WorldSpec,
    pub concepts: Vec<Concept>,
    pub hypernym_vectors: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn concept_name(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        s.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    s
}

/// Build a world: concept names, hypernym assignment, rare flags and
/// embedding vectors are all drawn from `spec.seed`.
///
/// Names are invented words the default lexicon tags as plain nouns, so
/// they chunk as single noun phrases. Rare concepts add nothing to the
/// image embedding.
const RARE_CANDIDATES: usize = 64;

/// Choose `round(fraction * n)` rare concepts, preferring (among a fixed
/// number of seeded candidate sets) the one whose share of the Zipf mass
/// is closest to `fraction`, so rare mentions are about as frequent as
/// rare concepts are numerous.
fn pick_rare(rng: &mut ChaCha8Rng, weights: &[f64], fraction: f64) -> BTreeSet<usize> {
    let n = weights.len();
    let n_rare = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let total: f64 = weights.iter().sum();
    let mut best: Option<(f64, BTreeSet<usize>)> = None;
    for _ in 0..RARE_CANDIDATES {
        let set: BTreeSet<usize> = rand::seq::index::sample(rng, n, n_rare)
            .into_iter()
            .collect();
        let gap = (set.iter().map(|&i| weights[i]).sum::<f64>() / total - fraction).abs();
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, set));
        }
    }
    best.expect("at least one candidate").1
}

pub fn synth_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lex = Lexicon::default_english();
    let noun_only = BTreeSet::from([Pos::Noun]);
    let mut used: BTreeSet<String> = HYPERNYMS.iter().map(|s| s.to_string()).collect();
    let mut names = Vec::with_capacity(spec.n_concepts);
    while names.len() < spec.n_concepts {
        let n = concept_name(&mut rng);
        if used.contains(&n) || lex.entry(&n).is_some() || lex.tags(&n) != noun_only {
            continue;
        }
        used.insert(n.clone());
        names.push(n);
    }
    let hypernym_vectors: Vec<Vec<f64>> = HYPERNYMS
        .iter()
        .map(|_| unit_vector(&mut rng, spec.embed_dim))
        .collect();
    let weights: Vec<f64> = (0..spec.n_concepts)
        .map(|r| 1.0 / ((r + 1) as f64).powf(spec.zipf_exponent))
        .collect();
    let rare = pick_rare(&mut rng, &weights, spec.rare_fraction);
    let concepts = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| Concept {
            name,
            hypernym: rng.random_range(0..HYPERNYMS.len()),
            rare: rare.contains(&i),
            vector: unit_vector(&mut rng, spec.embed_dim),
        })
        .collect();
    Ok(World {
        spec: spec.clone(),
        concepts,
        hypernym_vectors,
        weights,
    })
}

impl World {
    pub fn concept_index(&self, name: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c.name == name)
    }

    /// Name used for concept `c` in a target caption given what the
    /// alt-text revealed.
    pub fn caption_name(&self, c: usize, named_in_alt: bool) -> &str {
        let concept = &self.concepts[c];
        if concept.rare && !named_in_alt {
            HYPERNYMS[concept.hypernym]
        } else {
            &concept.name
        }
    }

    /// Every word the world can produce, for vocabulary building.
    pub fn vocabulary_words(&self) -> Vec<String> {
        let mut v: Vec<String> = ["and"].iter().map(|s| s.to_string()).collect();
        v.extend(HYPERNYMS.iter().map(|s| s.to_string()));
        v.extend(self.concepts.iter().map(|c| c.name.clone()));
        v
    }

    /// `n` items drawn from the stream identified by `stream_seed`.
    pub fn generate(&self, n: usize, stream_seed: u64) -> Vec<WorldItem> {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.spec.seed ^ stream_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        (0..n)
            .map(|i| self.item(&mut rng, format!("w{stream_seed}-{i:06}")))
            .collect()
    }

    fn item(&self, rng: &mut ChaCha8Rng, id: String) -> WorldItem {
        let spec = &self.spec;
        let mut concepts: Vec<usize> = rand::seq::index::sample_weighted(
            rng,
            spec.n_concepts,
            |i| self.weights[i],
            spec.concepts_per_image,
        )
        .expect("positive weights")
        .into_vec();
        concepts.sort_unstable();

        let mut image = vec![0.0; spec.embed_dim];
        for concept in concepts
            .iter()
            .map(|&c| &self.concepts[c])
            .filter(|c| !c.rare)
        {
            image
                .iter_mut()
                .zip(&concept.vector)
                .for_each(|(a, b)| *a += b);
        }
        for x in image.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += spec.noise * z;
        }
        normalize(&mut image);

        let alt_concepts: Vec<usize> = concepts
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < spec.alt_keep_prob)
            .collect();
        let distractor = if rng.random::<f64>() < spec.distractor_rate {
            let absent: Vec<usize> = (0..spec.n_concepts)
                .filter(|c| !concepts.contains(c))
                .collect();
            Some(absent[rng.random_range(0..absent.len())])
        } else {
            None
        };
        let mut alt_names: Vec<&str> = alt_concepts
            .iter()
            .map(|&c| self.concepts[c].name.as_str())
            .collect();
        if let Some(d) = distractor {
            alt_names.push(&self.concepts[d].name);
        }
        alt_names.shuffle(rng);

        let mut parts: Vec<&str> = Vec::with_capacity(concepts.len());
        for &c in &concepts {
            let name = self.caption_name(c, alt_concepts.contains(&c));
            if !parts.contains(&name) {
                parts.push(name);
            }
        }
        WorldItem {
            id,
            concepts,
            image,
            alt_text: alt_names.join(" "),
            alt_concepts,
            distractor,
            caption: parts.join(" and "),
        }
    }

    /// Word vocabulary covering every world word, on top of the reserved
    /// and byte tokens.
    pub fn vocab(&self) -> Result<Vocab> {
        let words = self.vocabulary_words();
        let size = MIN_VOCAB_SIZE + words.len();
        build_vocab(words.iter().map(String::as_str), size)
            .map_err(|e| TrainError::Config(e.to_string()))
    }

    /// Training triples for `items` under `vocab`.
    pub fn examples(&self, items: &[WorldItem], vocab: &Vocab) -> Vec<Example> {
        items
            .iter()
            .map(|it| Example {
                id: it.id.clone(),
                image: it.image.clone(),
                alt_ids: tokenize(vocab, &it.alt_text),
                caption_ids: tokenize(vocab, &it.caption),
            })
            .collect()
    }

    pub fn text_embedder(&self) -> WorldTextEmbedder {
        let mut words = HashMap::new();
        for c in &self.concepts {
            words.insert(c.name.clone(), c.vector.clone());
        }
        for (h, v) in HYPERNYMS.iter().zip(&self.hypernym_vectors) {
            words.insert(h.to_string(), v.clone());
        }
        WorldTextEmbedder {
            dim: self.spec.embed_dim,
            words,
        }
    }
}

/// Text side of the world: the normalised sum of the vectors of every
/// concept or hypernym named in the text.
#[derive(Debug, Clone)]
pub struct WorldTextEmbedder {
    dim: usize,
    words: HashMap<String, Vec<f64>>,
}

impl TextEmbedder for WorldTextEmbedder {
    fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0; self.dim];
        for w in text.split(|c: char| !c.is_alphanumeric()) {
            if let Some(x) = self.words.get(&w.to_lowercase()) {
                v.iter_mut().zip(x).for_each(|(a, b)| *a += b);
            }
        }
        normalize(&mut v);
        v.into_iter().map(|x| x as f32).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::noun_phrases;

    #[test]
    fn deterministic_streams() {
        let w = synth_world(&WorldSpec::default()).unwrap();
        assert_eq!(w.generate(50, 3), w.generate(50, 3));
        assert_ne!(w.generate(50, 3), w.generate(50, 4));
        let w2 = synth_world(&WorldSpec::default()).unwrap();
        assert_eq!(w, w2);
    }

    #[test]
    fn no_distractors_at_rate_zero() {
        let spec = WorldSpec {
            distractor_rate: 0.0,
            ..Default::default()
        };
        let w = synth_world(&spec).unwrap();
        for item in w.generate(500, 1) {
            assert!(item.distractor.is_none());
            for word in item.alt_text.split_whitespace() {
                let c = w.concept_index(word).unwrap();
                assert!(item.concepts.contains(&c));
            }
        }
    }

    #[test]
    fn distractor_frequency() {
        let spec = WorldSpec {
            distractor_rate: 0.2,
            ..Default::default()
        };
        let w = synth_world(&spec).unwrap();
        let items = w.generate(1000, 7);
        let freq = items.iter().filter(|i| i.distractor.is_some()).count() as f64 / 1000.0;
        assert!((freq - 0.2).abs() < 0.02, "{freq}");
        for i in &items {
            if let Some(d) = i.distractor {
                assert!(!i.concepts.contains(&d));
                assert!(i
                    .alt_text
                    .split_whitespace()
                    .any(|x| x == w.concepts[d].name));
            }
        }
    }

    #[test]
    fn rare_concepts_absent_from_image() {
        let w = synth_world(&WorldSpec {
            noise: 0.0,
            ..Default::default()
        })
        .unwrap();
        let mut rare_seen = 0;
        for item in w.generate(300, 2) {
            let mut v = vec![0.0; w.spec.embed_dim];
            for &c in &item.concepts {
                let k = &w.concepts[c];
                if k.rare {
                    rare_seen += 1;
                } else {
                    v.iter_mut().zip(&k.vector).for_each(|(a, b)| *a += b);
                }
            }
            normalize(&mut v);
            for (a, b) in v.iter().zip(&item.image) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(rare_seen > 0);
    }

    #[test]
    fn captions_name_rare_only_when_alt_does() {
        let w = synth_world(&WorldSpec::default()).unwrap();
        let lex = Lexicon::default_english();
        let mut seen_rare = (false, false);
        for item in w.generate(500, 5) {
            let nps = noun_phrases(&item.caption, &lex);
            assert_eq!(nps.len(), item.caption.split(" and ").count());
            for &c in &item.concepts {
                let concept = &w.concepts[c];
                let named = item.alt_concepts.contains(&c);
                let has_name = item.caption.split_whitespace().any(|x| x == concept.name);
                if concept.rare {
                    assert_eq!(has_name, named);
                    if named {
                        seen_rare.0 = true;
                    } else {
                        seen_rare.1 = true;
                        assert!(item.caption.contains(HYPERNYMS[concept.hypernym]));
                    }
                } else {
                    assert!(has_name);
                    assert!(nps.iter().any(|p| p.as_str() == concept.name));
                }
            }
        }
        assert_eq!(seen_rare, (true, true));
    }

    #[test]
    fn rare_mass_tracks_rare_fraction() {
        for seed in 0..6 {
            let w = synth_world(&WorldSpec {
                seed,
                ..Default::default()
            })
            .unwrap();
            let total: f64 = w.weights.iter().sum();
            let rare: f64 = w
                .concepts
                .iter()
                .zip(&w.weights)
                .filter(|(c, _)| c.rare)
                .map(|(_, x)| x)
                .sum();
            assert_eq!(w.concepts.iter().filter(|c| c.rare).count(), 12);
            assert!(
                (rare / total - 0.3).abs() < 0.02,
                "seed {seed}: {}",
                rare / total
            );
        }
    }

    #[test]
    fn vocab_covers_every_word() {
        let w = synth_world(&WorldSpec::default()).unwrap();
        let v = w.vocab().unwrap();
        for word in w.vocabulary_words() {
            assert!(v.word_id(&word).is_some(), "{word}");
        }
        let items = w.generate(5, 0);
        for e in w.examples(&items, &v) {
            assert!(e.caption_ids.iter().all(|&t| t as usize >= MIN_VOCAB_SIZE));
        }
    }

    #[test]
    fn spec_validation() {
        for s in [
            WorldSpec {
                rare_fraction: 0.0,
                ..Default::default()
            },
            WorldSpec {
                rare_fraction: 1.0,
                ..Default::default()
            },
            WorldSpec {
                concepts_per_image: 0,
                ..Default::default()
            },
            WorldSpec {
                distractor_rate: 1.1,
                ..Default::default()
            },
        ] {
            assert!(synth_world(&s).is_err());
        }
    }

    #[test]
    fn text_embedder_matches_concepts() {
        let w = synth_world(&WorldSpec::default()).unwrap();
        let e = w.text_embedder();
        let c = &w.concepts[0];
        let v = e.embed(&c.name);
        for (a, b) in v.iter().zip(&c.vector) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }
}
