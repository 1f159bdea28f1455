use std::path::Path;

use super::{PipelineError, TranscriptResult};

/// One row per record: `class_id,student_id,score,confidence`.
///
/// Scores use `.` as separator and confidence is written with 4 decimals.
pub fn to_csv(results: &[TranscriptResult]) -> Result<String, PipelineError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["class_id", "student_id", "score", "confidence"])?;
    for r in results {
        let class_id = r.class_id.as_deref().unwrap_or("");
        for rec in &r.records {
            w.write_record([
                class_id,
                &rec.student_id,
                &rec.score_text.replace(',', "."),
                &format!("{:.4}", rec.confidence),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::IoFailure(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Pretty-printed JSON array of results, fields in declaration order.
pub fn to_json(results: &[TranscriptResult]) -> Result<String, PipelineError> {
    Ok(serde_json::to_string_pretty(results)? + "\n")
}

pub fn emit_csv(results: &[TranscriptResult], path: impl AsRef<Path>) -> Result<(), PipelineError> {
    std::fs::write(path, to_csv(results)?)?;
    Ok(())
}

pub fn emit_json(results: &[TranscriptResult], path: impl AsRef<Path>) -> Result<(), PipelineError> {
    std::fs::write(path, to_json(results)?)?;
    Ok(())
}

/// Reads results written by [`emit_json`].
pub fn read_json(path: impl AsRef<Path>) -> Result<Vec<TranscriptResult>, PipelineError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::super::{GridSummary, ScoreRecord};
    use super::*;

    fn result(records: Vec<ScoreRecord>) -> TranscriptResult {
        TranscriptResult {
            source: "page.pgm".into(),
            class_id: Some("123".into()),
            deskew_angle: -0.5,
            header_rows: 1,
            grid: GridSummary {
                rows: 2,
                cols: 1,
                h_positions: vec![0, 10, 20],
                v_positions: vec![0, 10],
            },
            records,
        }
    }

    fn record(id: &str, score: &str, confidence: f64) -> ScoreRecord {
        ScoreRecord {
            row: 0,
            student_id: id.into(),
            score_text: score.into(),
            score_value: super::super::parse_score(score).ok(),
            confidence,
            flagged: confidence < 0.3,
        }
    }

    #[test]
    fn csv_line_format() {
        let csv = to_csv(&[result(vec![record("20180001", "8.5", 0.9731)])]).unwrap();
        assert_eq!(csv, "class_id,student_id,score,confidence\n123,20180001,8.5,0.9731\n");
        let csv = to_csv(&[result(vec![record("1", "9,25", 0.2)])]).unwrap();
        assert!(csv.ends_with("123,1,9.25,0.2000\n"));
    }

    #[test]
    fn empty_results_header_only() {
        assert_eq!(to_csv(&[]).unwrap(), "class_id,student_id,score,confidence\n");
    }

    #[test]
    fn csv_reparses_to_same_fields() {
        let results = [result(vec![record("20180001", "8.5", 0.97314), record("20180002", "", 1.0)])];
        let text = to_csv(&results).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<Vec<String>> = rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
        assert_eq!(rows, vec![vec!["123", "20180001", "8.5", "0.9731"], vec!["123", "20180002", "", "1.0000"]]);
    }

    #[test]
    fn json_round_trip_and_key_order() {
        let results = vec![result(vec![record("20180001", "8.5", 0.25)])];
        let text = to_json(&results).unwrap();
        let keys = ["\"source\"", "\"class_id\"", "\"deskew_angle\"", "\"header_rows\"", "\"grid\"", "\"records\""];
        let at: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(at.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("\"flagged\": true"));
        let back: Vec<TranscriptResult> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, results);
    }
}
