use proptest::prelude::*;

use crewroom_core::knowledge::{chunk_document, EmbeddingVector};
use crewroom_core::orchestrator::{parse_verdict, seeded_shuffle};
use crewroom_core::study::sus_score;

proptest! {
    #[test]
    fn chunks_cover_the_text(text in "\\PC{0,600}", size in 1usize..120, overlap_frac in 0.0f64..1.0) {
        let overlap = ((size as f64) * overlap_frac) as usize % size;
        let chunks = chunk_document(&text, size, overlap).unwrap();
        let mut rebuilt = String::new();
        let mut end = 0;
        for c in &chunks {
            prop_assert!(c.char_start <= end);
            rebuilt.extend(c.text.chars().skip(end - c.char_start));
            end = c.char_end;
        }
        prop_assert_eq!(rebuilt, text);
    }

    #[test]
    fn shuffle_is_a_permutation(n in 0usize..40, seed in any::<u64>()) {
        let mut v: Vec<usize> = (0..n).collect();
        seeded_shuffle(&mut v, seed);
        let mut again: Vec<usize> = (0..n).collect();
        seeded_shuffle(&mut again, seed);
        prop_assert_eq!(&v, &again);
        v.sort();
        prop_assert_eq!(v, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn verdict_parser_is_total(text in "\\PC{0,200}") {
        if let Some(v) = parse_verdict(&text) {
            prop_assert!((0.0..=1.0).contains(&v.score));
        }
    }

    #[test]
    fn sus_scores_stay_on_the_grid(responses in prop::collection::vec(1u8..=5, 10)) {
        let s = sus_score(&responses).unwrap();
        prop_assert!((0.0..=100.0).contains(&s));
        prop_assert_eq!((s / 2.5).fract(), 0.0);
    }

    #[test]
    fn cosine_is_bounded(a in prop::collection::vec(-1.0f32..1.0, 8), b in prop::collection::vec(-1.0f32..1.0, 8)) {
        if let (Some(a), Some(b)) = (EmbeddingVector::normalized(a), EmbeddingVector::normalized(b)) {
            let c = a.cosine(&b);
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!((a.cosine(&a) - 1.0).abs() < 1e-6);
            prop_assert_eq!(c, b.cosine(&a));
        }
    }
}
