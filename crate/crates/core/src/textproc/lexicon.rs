use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TextError;
use crate::io::{read_jsonl, write_jsonl};

/// Coarse part-of-speech tags used by the chunker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Det,
    Adj,
    Noun,
    Verb,
    Adp,
    Pron,
    Other,
}

impl Pos {
    fn parse(s: &str) -> Option<Pos> {
        Some(match s {
            "DET" => Pos::Det,
            "ADJ" => Pos::Adj,
            "NOUN" => Pos::Noun,
            "VERB" => Pos::Verb,
            "ADP" => Pos::Adp,
            "PRON" => Pos::Pron,
            "OTHER" => Pos::Other,
            _ => return None,
        })
    }
}

/// Word → tag set. Lookup is total: words missing from the table are tagged
/// by suffix, defaulting to NOUN.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    words: HashMap<String, BTreeSet<Pos>>,
}

#[derive(Serialize, Deserialize)]
struct LexiconLine {
    word: String,
    tags: Vec<Pos>,
}

// word TAG [TAG...]
const DEFAULT_LEXICON: &str = "\
a DET\nan DET\nthe DET\nthis DET PRON\nthat DET PRON\nthese DET PRON\nthose DET PRON\nsome DET\nany DET\n\
each DET\nevery DET\nno DET\nanother DET\nits DET\nhis DET\nher DET PRON\ntheir DET\nour DET\nmy DET\nyour DET\n\
i PRON\nyou PRON\nhe PRON\nshe PRON\nit PRON\nwe PRON\nthey PRON\nhim PRON\nthem PRON\nus PRON\nme PRON\n\
who PRON\nwhich PRON\nwhat PRON\nsomething PRON\nanything PRON\nnothing PRON\nsomeone PRON\nthere PRON\n\
in ADP\non ADP\nat ADP\nof ADP\nwith ADP\nwithout ADP\nby ADP\nfor ADP\nfrom ADP\nto ADP\ninto ADP\nonto ADP\n\
over ADP\nunder ADP\nabove ADP\nbelow ADP\nbehind ADP\nbeside ADP\nbetween ADP\nnear ADP\naround ADP\n\
through ADP\nacross ADP\nalong ADP\nagainst ADP\namong ADP\nlike ADP\nas ADP\nabout ADP\ninside ADP\n\
outside ADP\nupon ADP\nwithin ADP\nbeneath ADP\natop ADP\n\
and OTHER\nor OTHER\nbut OTHER\nnot OTHER\nvery OTHER\nalso OTHER\nthen OTHER\nhere OTHER\nwhile OTHER\n\
where OTHER\nwhen OTHER\nif OTHER\nso OTHER\njust OTHER\ntoo OTHER\n\
is VERB\nare VERB\nwas VERB\nwere VERB\nbe VERB\nbeen VERB\nbeing VERB\nhas VERB\nhave VERB\nhad VERB\n\
do VERB\ndoes VERB\ndid VERB\ncan VERB\ncould VERB\nwill VERB\nwould VERB\nmay VERB\nmight VERB\nshould VERB\n\
shows VERB\nshow VERB\nsits VERB\nsit VERB\nsat VERB\nstands VERB\nstand VERB\nstood VERB\nlies VERB\n\
holds VERB\nhold VERB\nwears VERB\nwear VERB\nlooks VERB\nlook VERB\nappears VERB\nseems VERB\nrides VERB\n\
flies VERB\nruns VERB\neats VERB\nhangs VERB\ncontains VERB\nfeatures VERB\ndepicts VERB\nmade VERB\n\
great ADJ\ngray ADJ\ngrey ADJ\nred ADJ\nblue ADJ\ngreen ADJ\nyellow ADJ\nblack ADJ\nwhite ADJ\nbrown ADJ\n\
orange ADJ NOUN\npurple ADJ\npink ADJ\ngolden ADJ\nsilver ADJ NOUN\ndark ADJ\nlight ADJ NOUN\nbright ADJ\n\
small ADJ\nlarge ADJ\nbig ADJ\nlittle ADJ\ntall ADJ\nshort ADJ\nlong ADJ\nwide ADJ\nnarrow ADJ\nold ADJ\n\
new ADJ\nyoung ADJ\nwooden ADJ\nmetal NOUN ADJ\nstone NOUN ADJ\nglass NOUN\nplastic ADJ NOUN\nround ADJ\n\
square ADJ NOUN\nflat ADJ\nopen ADJ\nclosed ADJ\nempty ADJ\nfull ADJ\nclose-up ADJ\nblurry ADJ\ncropped ADJ\n\
low ADJ\nhigh ADJ\nhistoric ADJ\nmodern ADJ\nancient ADJ\nvintage ADJ\nsnowy ADJ\nsunny ADJ\ncloudy ADJ\n\
rocky ADJ\ngrassy ADJ\nsandy ADJ\nwet ADJ\ndry ADJ\nhot ADJ\ncold ADJ\nfresh ADJ\nfront ADJ NOUN\nback ADJ NOUN\n\
left ADJ\nright ADJ\nupper ADJ\nlower ADJ\nmain ADJ\nseveral ADJ\nmany ADJ\nfew ADJ\nmultiple ADJ\n\
one ADJ\ntwo ADJ\nthree ADJ\nfour ADJ\nfive ADJ\nsix ADJ\nseven ADJ\neight ADJ\nnine ADJ\nten ADJ\n\
photo NOUN\nphotograph NOUN\npicture NOUN\nimage NOUN\npainting NOUN\nsculpture NOUN\ncartoon NOUN\n\
rendering NOUN\ndrawing NOUN\nillustration NOUN\nproduct NOUN\nresolution NOUN\nbuilding NOUN\n\
dog NOUN\ncat NOUN\nbird NOUN\nowl NOUN\nhorse NOUN\ncow NOUN\nsheep NOUN\nfish NOUN\nanimal NOUN\n\
iguana NOUN\nlizard NOUN\nsnake NOUN\ninsect NOUN\nbutterfly NOUN\nflower NOUN\ntree NOUN\nplant NOUN\n\
grass NOUN\nleaf NOUN\nleaves NOUN\nforest NOUN\nmountain NOUN\nhill NOUN\nriver NOUN\nlake NOUN\nsea NOUN\n\
ocean NOUN\nbeach NOUN\nsky NOUN\ncloud NOUN\nsun NOUN\nmoon NOUN\nsnow NOUN\nwater NOUN\nrock NOUN\n\
field NOUN\ngarden NOUN\npark NOUN\nstreet NOUN\nroad NOUN\ncity NOUN\ntown NOUN\nhouse NOUN\nchurch NOUN\n\
tower NOUN\nbridge NOUN\nwall NOUN\nwindow NOUN\ndoor NOUN\nroof NOUN\nroom NOUN\ntable NOUN\nchair NOUN\n\
car NOUN\ntruck NOUN\nbus NOUN\ntrain NOUN\nboat NOUN\nship NOUN\nplane NOUN\nbicycle NOUN\nvehicle NOUN\n\
man NOUN\nwoman NOUN\nperson NOUN\npeople NOUN\nchild NOUN\nboy NOUN\ngirl NOUN\ngroup NOUN\nteam NOUN\n\
shell NOUN\nconch NOUN\nfood NOUN\nplate NOUN\nbowl NOUN\ncup NOUN\nbottle NOUN\nbook NOUN\nsign NOUN\n\
text NOUN\nlogo NOUN\nmap NOUN\nstatue NOUN\nmuseum NOUN\nstation NOUN\nbackground NOUN\nforeground NOUN\n\
side NOUN\ntop NOUN\nbottom NOUN\ncenter NOUN\nmiddle NOUN\ncorner NOUN\nedge NOUN\nsurface NOUN\n\
tool NOUN\nmachine NOUN\ndevice NOUN\ncamera NOUN\nphone NOUN\nshirt NOUN\nhat NOUN\ndress NOUN\n\
branch NOUN\nbranches NOUN\nfeather NOUN\neye NOUN\nhead NOUN\nhand NOUN\nface NOUN\nbody NOUN\n\
wing NOUN\ntail NOUN\nleg NOUN\nstrix NOUN\nnebulosa NOUN\nview NOUN\nscene NOUN\nday NOUN\nnight NOUN\n";

impl Lexicon {
    /// The embedded default word list.
    pub fn default_english() -> Self {
        let mut words = HashMap::new();
        for line in DEFAULT_LEXICON.lines() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let tags: BTreeSet<Pos> = parts.filter_map(Pos::parse).collect();
            words.insert(word.to_string(), tags);
        }
        Self { words }
    }

    pub fn insert(&mut self, word: &str, tags: impl IntoIterator<Item = Pos>) {
        self.words
            .entry(word.to_lowercase())
            .or_default()
            .extend(tags);
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Explicit table entry, if any.
    pub fn entry(&self, word: &str) -> Option<&BTreeSet<Pos>> {
        self.words.get(word)
    }

    /// Tags for a lowercased word: table entry, else suffix heuristics.
    pub fn tags(&self, word: &str) -> BTreeSet<Pos> {
        if let Some(t) = self.words.get(word) {
            if !t.is_empty() {
                return t.clone();
            }
        }
        BTreeSet::from([suffix_tag(word)])
    }

    /// True when the table itself lists `word` as a noun.
    pub fn is_listed_noun(&self, word: &str) -> bool {
        self.words.get(word).is_some_and(|t| t.contains(&Pos::Noun))
    }

    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        let mut lines: Vec<LexiconLine> = self
            .words
            .iter()
            .map(|(w, t)| LexiconLine {
                word: w.clone(),
                tags: t.iter().copied().collect(),
            })
            .collect();
        lines.sort_by(|a, b| a.word.cmp(&b.word));
        write_jsonl(path, &lines)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let mut lex = Lexicon::default();
        for (_, l) in read_jsonl::<LexiconLine>(path)? {
            lex.insert(&l.word, l.tags);
        }
        Ok(lex)
    }
}

fn suffix_tag(word: &str) -> Pos {
    let n = word.chars().count();
    if word.chars().all(|c| c.is_ascii_digit()) && n > 0 {
        return Pos::Adj;
    }
    if n > 4 && word.ends_with("ing") || n > 3 && word.ends_with("ed") {
        return Pos::Verb;
    }
    if n > 3 && word.ends_with("ly") {
        return Pos::Other;
    }
    const ADJ_SUFFIXES: [&str; 7] = ["ous", "ful", "ive", "able", "ible", "ish", "less"];
    if n > 4 && ADJ_SUFFIXES.iter().any(|s| word.ends_with(s)) {
        return Pos::Adj;
    }
    Pos::Noun
}
