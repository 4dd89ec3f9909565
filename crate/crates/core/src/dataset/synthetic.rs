//! Template-generated chemistry process questions with executable reference
//! programs. Used for the bundled corpus, tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frontend::parse_source;
use crate::interp::{answer_of, execute, Limits};

use super::{options_with_gold, DatasetVersion, QAExample, Split};

/// A number as it appears in text and in the program.
#[derive(Clone)]
struct Num {
    lexeme: String,
    value: f64,
}

fn int(v: i64) -> Num {
    Num { lexeme: v.to_string(), value: v as f64 }
}

fn real(v: f64, decimals: usize) -> Num {
    let lexeme = format!("{v:.decimals$}");
    let value = lexeme.parse().unwrap();
    Num { lexeme, value }
}

struct Draft {
    template: &'static str,
    version: DatasetVersion,
    context: String,
    question: String,
    program: String,
    /// Numbers mentioned in the text; must be pairwise distinct.
    mentioned: Vec<Num>,
    /// Literals the program uses that are not taken from the text.
    constants: &'static [f64],
}

type Template = fn(&mut ChaCha8Rng) -> Draft;

pub const TEMPLATE_NAMES: [&str; 8] =
    ["heating", "evaporation", "ratio", "accumulation", "growth", "threshold", "cooling", "dilution"];

const TEMPLATES: [Template; 8] = [heating, evaporation, ratio, accumulation, growth, threshold, cooling, dilution];

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options.choose(rng).unwrap()
}

fn heating(rng: &mut ChaCha8Rng) -> Draft {
    let mass = int(rng.gen_range(3..=9));
    let t0 = int(rng.gen_range(20..=60));
    let th = int(t0.value as i64 + rng.gen_range(6..=20));
    let loss = real(rng.gen_range(0.5..3.0), 2);
    let yld = real(rng.gen_range(20.0..60.0), 1);
    let d = int(rng.gen_range(3..=6));
    let m = int(rng.gen_range(8..=14));
    let compound = pick(rng, &["hydroxytetralone", "benzaldehyde", "acetanilide", "cinnamic acid"]);
    Draft {
        template: "heating",
        version: DatasetVersion::V1,
        context: format!(
            "A mixture of {} g of {compound} was warmed in ethanol to {} degrees. If the temperature passes {} degrees, {} grams of the product are lost for each additional second. The process yields {} grams of product.",
            mass.lexeme, t0.lexeme, th.lexeme, loss.lexeme, yld.lexeme
        ),
        question: format!(
            "{} if we increase the temperature by {} degrees every second for {} seconds?",
            pick(rng, &["How many grams would the process yield", "What is the yield in grams"]),
            d.lexeme,
            m.lexeme
        ),
        program: format!(
            "func simulation() {{ temp = {}; product = {}; repeat({}) {{ temp = temp + {}; if(temp > {}) {{ product = product - {}; }} }} return product; }}",
            t0.lexeme, yld.lexeme, m.lexeme, d.lexeme, th.lexeme, loss.lexeme
        ),
        mentioned: vec![mass, t0, th, loss, yld, d, m],
        constants: &[],
    }
}

fn evaporation(rng: &mut ChaCha8Rng) -> Draft {
    let w = int(rng.gen_range(40..=120));
    let th = int(rng.gen_range(60..=90));
    let r = real(rng.gen_range(0.5..4.0), 1);
    let above = rng.gen_bool(0.7);
    let temp = int(th.value as i64 + if above { rng.gen_range(3..=15) } else { -rng.gen_range(3..=15) });
    let m = int(rng.gen_range(3..=9));
    Draft {
        template: "evaporation",
        version: DatasetVersion::V1,
        context: format!(
            "The solution contains {} ml of water. While it is heated above {} degrees, water evaporates at a rate of {} ml per minute.",
            w.lexeme, th.lexeme, r.lexeme
        ),
        question: format!(
            "{} after heating at {} degrees for {} minutes?",
            pick(rng, &["How many milliliters of water remain", "What volume of water is left in ml"]),
            temp.lexeme,
            m.lexeme
        ),
        program: format!(
            "func simulation() {{ water = {}; temp = {}; repeat({}) {{ if(temp > {}) {{ water = water - {}; }} }} return water; }}",
            w.lexeme, temp.lexeme, m.lexeme, th.lexeme, r.lexeme
        ),
        mentioned: vec![w, th, r, temp, m],
        constants: &[],
    }
}

fn ratio(rng: &mut ChaCha8Rng) -> Draft {
    let a = real(rng.gen_range(1.0..9.0), 2);
    let b = int(rng.gen_range(10..=60));
    let c = real(rng.gen_range(1.0..8.0), 1);
    let d = int(rng.gen_range(3..=20));
    let solute = pick(rng, &["benzonitrile", "sodium acetate", "urea", "glycine"]);
    Draft {
        template: "ratio",
        version: DatasetVersion::V2,
        context: format!(
            "A mixture of {} g of {solute} and {} ml of water was heated to yield {} g of product.",
            a.lexeme, b.lexeme, c.lexeme
        ),
        question: format!(
            "How many milliliters of water do we need to yield {} grams of product {}?",
            d.lexeme,
            pick(rng, &["if we preserve the same ratio", "at the same ratio"])
        ),
        program: format!(
            "func simulation() {{ ratio = {} / {}; water = ratio * {}; return water; }}",
            b.lexeme, c.lexeme, d.lexeme
        ),
        mentioned: vec![a, b, c, d],
        constants: &[],
    }
}

fn accumulation(rng: &mut ChaCha8Rng) -> Draft {
    let b = int(rng.gen_range(5..=50));
    let a = int(rng.gen_range(3..=12));
    let m = int(rng.gen_range(3..=10));
    Draft {
        template: "accumulation",
        version: DatasetVersion::V2,
        context: format!(
            "A reactor holds {} g of catalyst. Every hour an operator adds {} g of fresh catalyst to the reactor.",
            b.lexeme, a.lexeme
        ),
        question: format!(
            "{} after {} hours?",
            pick(rng, &["How many grams of catalyst will the reactor hold", "What mass of catalyst in grams is in the reactor"]),
            m.lexeme
        ),
        program: format!(
            "func simulation() {{ total = {}; repeat({}) {{ total = total + {}; }} return total; }}",
            b.lexeme, m.lexeme, a.lexeme
        ),
        mentioned: vec![b, a, m],
        constants: &[],
    }
}

fn growth(rng: &mut ChaCha8Rng) -> Draft {
    let b = int(rng.gen_range(5..=50));
    let f = int(rng.gen_range(3..=5));
    let m = int(rng.gen_range(3..=7));
    Draft {
        template: "growth",
        version: DatasetVersion::V1,
        context: format!(
            "A bacterial culture starts with {} g of biomass. Each hour the biomass grows by a factor of {}.",
            b.lexeme, f.lexeme
        ),
        question: format!(
            "{} after {} hours?",
            pick(rng, &["How many grams of biomass will the culture contain", "What is the biomass of the culture in grams"]),
            m.lexeme
        ),
        program: format!(
            "func simulation() {{ total = {}; repeat({}) {{ total = total * {}; }} return total; }}",
            b.lexeme, m.lexeme, f.lexeme
        ),
        mentioned: vec![b, f, m],
        constants: &[],
    }
}

fn threshold(rng: &mut ChaCha8Rng) -> Draft {
    let t0 = int(rng.gen_range(40..=90));
    let y = real(rng.gen_range(5.0..40.0), 1);
    let th = int(t0.value as i64 + rng.gen_range(5..=25));
    let d = int(rng.gen_range(3..=30));
    Draft {
        template: "threshold",
        version: DatasetVersion::V2,
        context: format!(
            "The reaction was refluxed at {} degrees and {} g of the title product were obtained. If the temperature exceeds {} degrees the process fails and nothing is obtained.",
            t0.lexeme, y.lexeme, th.lexeme
        ),
        question: format!(
            "{} if the temperature increases by {} degrees?",
            pick(rng, &["What will be the outcome of the process in grams", "How many grams of product are obtained"]),
            d.lexeme
        ),
        program: format!(
            "func simulation() {{ temp = {} + {}; product = {}; if(temp > {}) {{ product = 0; }} return product; }}",
            t0.lexeme, d.lexeme, y.lexeme, th.lexeme
        ),
        mentioned: vec![t0, y, th, d],
        constants: &[0.0],
    }
}

fn cooling(rng: &mut ChaCha8Rng) -> Draft {
    let d = int(rng.gen_range(3..=8));
    let steps_to_floor = rng.gen_range(2..=6);
    let lo = int(rng.gen_range(5..=30));
    let t0 = int(lo.value as i64 + d.value as i64 * steps_to_floor);
    let m = int(rng.gen_range(3..=10));
    Draft {
        template: "cooling",
        version: DatasetVersion::V1,
        context: format!(
            "The mixture is at {} degrees. The cooling bath lowers the temperature by {} degrees per minute but cannot cool it below {} degrees.",
            t0.lexeme, d.lexeme, lo.lexeme
        ),
        question: format!(
            "What will the temperature of the mixture be after {} minutes {}?",
            m.lexeme,
            pick(rng, &["of cooling", "in the bath"])
        ),
        program: format!(
            "func simulation() {{ temp = {}; repeat({}) {{ if(temp > {}) {{ temp = temp - {}; }} }} return temp; }}",
            t0.lexeme, m.lexeme, lo.lexeme, d.lexeme
        ),
        mentioned: vec![t0, d, lo, m],
        constants: &[],
    }
}

fn dilution(rng: &mut ChaCha8Rng) -> Draft {
    let c = real(rng.gen_range(1.0..12.0), 1);
    let m = int(rng.gen_range(3..=6));
    Draft {
        template: "dilution",
        version: DatasetVersion::V2,
        context: format!(
            "A sample with a concentration of {} mol per liter is diluted repeatedly. Each dilution halves the concentration.",
            c.lexeme
        ),
        question: format!(
            "{} after {} dilutions?",
            pick(rng, &["What is the concentration in mol per liter", "What concentration remains"]),
            m.lexeme
        ),
        program: format!(
            "func simulation() {{ conc = {}; repeat({}) {{ conc = conc / 2; }} return conc; }}",
            c.lexeme, m.lexeme
        ),
        mentioned: vec![c, m],
        constants: &[2.0],
    }
}

/// Irrelevant facts with numbers, as real procedure texts are full of them.
const FILLERS: [&str; 8] = [
    "The flask was cleaned {} days ago.",
    "The laboratory keeps {} spare beakers.",
    "The procedure was first reported {} years ago.",
    "The stirring bar is {} mm long.",
    "The bench holds {} labelled bottles.",
    "The balance was calibrated {} weeks ago.",
    "A second batch used a {} ml beaker.",
    "The fume hood was serviced {} months ago.",
];

/// Inserts up to two filler sentences at random sentence boundaries.
fn add_fillers(draft: &mut Draft, rng: &mut ChaCha8Rng) {
    let mut sentences: Vec<String> = draft.context.split_inclusive(". ").map(|s| s.trim().to_owned()).collect();
    for _ in 0..rng.gen_range(0..=2) {
        let n = int(rng.gen_range(2..=99));
        let text = FILLERS.choose(rng).unwrap().replace("{}", &n.lexeme);
        let at = rng.gen_range(0..=sentences.len());
        sentences.insert(at, text);
        draft.mentioned.push(n);
    }
    draft.context = sentences.join(" ");
}

impl Draft {
    /// Text numbers must be unambiguous: pairwise distinct and distinct from
    /// program constants.
    fn well_formed(&self) -> bool {
        self.mentioned.iter().enumerate().all(|(i, n)| {
            !self.mentioned[i + 1..].iter().any(|o| o.value == n.value) && !self.constants.contains(&n.value)
        })
    }
}

/// Rounds to 12 significant digits, dropping float noise such as
/// `38.900000000000006`.
fn round_significant(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(11 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// Generates `n` examples cycling through the templates. A seeded quarter
/// of them, rounded down, goes to the test split.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<QAExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for &i in &order[..n / 4] {
        is_test[i] = true;
    }
    (0..n)
        .map(|i| {
            let template = TEMPLATES[i % TEMPLATES.len()];
            let (draft, gold) = loop {
                let mut draft = template(&mut rng);
                add_fillers(&mut draft, &mut rng);
                if !draft.well_formed() {
                    continue;
                }
                let program = parse_source(&draft.program).expect("template programs parse");
                match answer_of(&execute(&program, Limits::default())) {
                    Some(v) if v.is_finite() => break (draft, round_significant(v)),
                    _ => continue,
                }
            };
            let options = options_with_gold(gold, rng.gen());
            QAExample {
                id: format!("syn-{}-{:04}", draft.template, i),
                version: draft.version,
                split: if is_test[i] { Split::Test } else { Split::Train },
                context: draft.context,
                question: draft.question,
                gold_answer: gold,
                options,
                reference_program: draft.program,
            }
        })
        .collect()
}

/// Size and seed of the corpus bundled under `data/`.
pub const BUNDLED_SIZE: usize = 200;
pub const BUNDLED_SEED: u64 = 2024;

pub fn bundled_corpus() -> Vec<QAExample> {
    generate_corpus(BUNDLED_SIZE, BUNDLED_SEED)
}
