use super::GestureVocabulary;
use crate::{Error, Result};

/// One transcript line: inclusive native-frame bounds and a class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub class: usize,
}

/// Parses a JIGSAWS transcript (`start end Gk` per line, native frames,
/// inclusive bounds). Segments are returned sorted by start.
pub fn parse_transcript(text: &str, vocab: &GestureVocabulary) -> Result<Vec<Segment>> {
    let mut segments = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = || Error::MalformedLine {
            line: line_no,
            content: line.to_string(),
        };
        if fields.len() != 3 {
            return Err(malformed());
        }
        let start: usize = fields[0].parse().map_err(|_| malformed())?;
        let end: usize = fields[1].parse().map_err(|_| malformed())?;
        if end < start {
            return Err(malformed());
        }
        let class = vocab.index_of(fields[2]).ok_or_else(|| Error::UnknownGesture {
            line: line_no,
            id: fields[2].to_string(),
        })?;
        segments.push(Segment { start, end, class });
    }
    segments.sort_by_key(|s| (s.start, s.end));
    for pair in segments.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(Error::OverlappingSegments {
                prev_start: pair[0].start,
                prev_end: pair[0].end,
                start: pair[1].start,
                end: pair[1].end,
            });
        }
    }
    Ok(segments)
}

pub fn render_transcript(segments: &[Segment], vocab: &GestureVocabulary) -> String {
    let mut out = String::new();
    for s in segments {
        let id = vocab.get(s.class).map(|g| g.id.as_str()).unwrap_or("?");
        out.push_str(&format!("{} {} {}\n", s.start, s.end, id));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> GestureVocabulary {
        GestureVocabulary::jigsaws_suturing()
    }

    #[test]
    fn maps_fields_directly() {
        let segs = parse_transcript("80 300 G1\n301 470 G5", &vocab()).unwrap();
        assert_eq!(
            segs,
            vec![
                Segment {
                    start: 80,
                    end: 300,
                    class: 0
                },
                Segment {
                    start: 301,
                    end: 470,
                    class: 4
                },
            ]
        );
    }

    #[test]
    fn empty_file_gives_no_segments() {
        assert!(parse_transcript("", &vocab()).unwrap().is_empty());
        assert!(parse_transcript("\n  \n", &vocab()).unwrap().is_empty());
    }

    #[test]
    fn unknown_gesture() {
        let err = parse_transcript("80 300 G99", &vocab()).unwrap_err();
        assert!(matches!(err, Error::UnknownGesture { line: 1, ref id } if id == "G99"));
    }

    #[test]
    fn malformed_lines() {
        for text in ["80 300", "80 300 G1 extra", "a 300 G1", "80 -1 G1", "300 80 G1"] {
            assert!(
                matches!(parse_transcript(text, &vocab()), Err(Error::MalformedLine { .. })),
                "{text}"
            );
        }
    }

    #[test]
    fn unsorted_input_is_sorted_and_overlap_rejected() {
        let segs = parse_transcript("301 470 G5\n80 300 G1\n", &vocab()).unwrap();
        assert_eq!(segs[0].start, 80);
        let err = parse_transcript("80 300 G1\n300 470 G5", &vocab()).unwrap_err();
        assert!(matches!(err, Error::OverlappingSegments { .. }));
    }

    #[test]
    fn trailing_whitespace_and_crlf() {
        let segs = parse_transcript("80 300 G1 \r\n301 470 G5\r\n", &vocab()).unwrap();
        assert_eq!(segs.len(), 2);
    }
}
