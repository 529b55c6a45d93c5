//! Regenerates `fixtures/table1/`: a 5×50 study manifest plus 45 completed
//! sessions whose ballots add up to 628 / 599 / 585 / 438.
//!
//! cargo run -p ninegrid --example table1_fixture -- fixtures/table1

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use chrono::{DateTime, Duration, Utc};
use ninegrid::arrange::{ScorerRole, Strategy, VariantKey};
use ninegrid::study::{build_study, Ballot, QuadRef, VariantRef, BALLOT_LOG};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const SEED: u64 = 20_240_301;

fn main() -> ninegrid::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "fixtures/table1".into()),
    );
    fs::create_dir_all(&out)?;

    let quads: Vec<QuadRef> = (0..250)
        .map(|i| {
            let set_id = format!("set-{i:03}");
            let variants = VariantKey::ALL
                .iter()
                .map(|k| {
                    let digest = hex::encode(Sha256::digest(format!("{set_id}/{k}").as_bytes()));
                    VariantRef {
                        scorer: k.scorer,
                        strategy: k.strategy,
                        scorer_id: match k.scorer {
                            ScorerRole::Aesthetic => "external:nima".into(),
                            ScorerRole::Content => "external:i2pa".into(),
                        },
                        path: format!("media/{}.png", &digest[..32]),
                    }
                })
                .collect();
            QuadRef { set_id, variants }
        })
        .collect();
    let bundle = build_study("table1", &quads, 5, 50, SEED)?;
    bundle.save(&out)?;

    let counts = [
        (
            VariantKey::new(ScorerRole::Aesthetic, Strategy::CenterPriority),
            628,
        ),
        (
            VariantKey::new(ScorerRole::Aesthetic, Strategy::Sequential),
            599,
        ),
        (
            VariantKey::new(ScorerRole::Content, Strategy::CenterPriority),
            585,
        ),
        (
            VariantKey::new(ScorerRole::Content, Strategy::Sequential),
            438,
        ),
    ];
    let mut choices: Vec<VariantKey> = counts
        .iter()
        .flat_map(|&(k, n)| std::iter::repeat_n(k, n))
        .collect();
    assert_eq!(choices.len(), 45 * 50);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    choices.shuffle(&mut rng);

    let start: DateTime<Utc> = "2024-03-01T09:00:00Z".parse().expect("valid timestamp");
    let mut ballots = fs::File::create(out.join(BALLOT_LOG))?;
    let mut sessions = fs::File::create(out.join("sessions.jsonl"))?;
    let mut next = choices.into_iter();
    for s in 0..45usize {
        let session_id = format!("fixture-{s:02}");
        let questionnaire_index = s % 5;
        let created_at = start + Duration::minutes(30 * s as i64);
        writeln!(
            sessions,
            "{}",
            serde_json::json!({
                "session_id": session_id,
                "questionnaire_index": questionnaire_index,
                "created_at": created_at,
            })
        )?;
        for (q, question) in bundle.questionnaires[questionnaire_index]
            .questions
            .iter()
            .enumerate()
        {
            let variant = next.next().expect("2250 choices");
            let slot = question
                .options
                .iter()
                .position(|k| *k == variant)
                .expect("permutation")
                + 1;
            let ballot = Ballot {
                study_id: bundle.study_id.clone(),
                session_id: session_id.clone(),
                questionnaire_index,
                question_index: q,
                chosen_slot: slot as u8,
                resolved_variant: variant,
                timestamp: created_at + Duration::seconds(20 * (q as i64 + 1)),
            };
            writeln!(ballots, "{}", serde_json::to_string(&ballot)?)?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}
