//! Survey cleaning: refusal removal, choice-count and sum-window checks.
//!
//! ```text
//! cargo run --example survey_cleaning
//! ```

use uqkit::ingest::{clean_survey, read_survey_csv, write_survey_csv};

const TABLE: &str = "\
question_id,text,choice_1,choice_2,choice_3,ratio_1,ratio_2,ratio_3
q1,Should the city add bike lanes?,Yes,No,Refused,55,44,1
q2,Rate the new park,Good,Bad,Skipped on web,48,47,5
q3,Only non-answers,Refused,Web blank,,70,30,
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = read_survey_csv(TABLE.as_bytes())?;
    let (clean, stats) = clean_survey(&raw);
    println!("{stats:#?}");
    write_survey_csv(
        std::io::stdout().lock(),
        &["cleaned example".to_string()],
        &clean,
    )?;
    Ok(())
}
