use newswatch_core::ingest::{identify_language, IngestError};
use newswatch_core::resources::language_profiles;

const GERMAN: &str = include_str!("fixtures/lang/de_news.txt");

#[test]
fn german_news_article_is_german() {
    assert!(GERMAN.split_whitespace().count() >= 500);
    assert_eq!(identify_language(GERMAN, language_profiles()).unwrap(), "de");
}

#[test]
fn every_german_paragraph_is_german() {
    for p in GERMAN.lines().filter(|l| !l.trim().is_empty()) {
        assert_eq!(identify_language(p, language_profiles()).unwrap(), "de", "{p}");
    }
}

#[test]
fn short_sentences_in_each_language() {
    let cases = [
        ("en", "The government announced new measures to support families affected by the floods."),
        ("fr", "Le gouvernement a annoncé de nouvelles mesures pour aider les familles touchées par les inondations."),
        ("es", "El gobierno anunció nuevas medidas para ayudar a las familias afectadas por las inundaciones."),
        ("it", "Il governo ha annunciato nuove misure per aiutare le famiglie colpite dalle alluvioni."),
        ("de", "Die Regierung hat neue Maßnahmen angekündigt, um die vom Hochwasser betroffenen Familien zu unterstützen."),
    ];
    for (lang, text) in cases {
        assert_eq!(identify_language(text, language_profiles()).unwrap(), lang, "{text}");
    }
}

#[test]
fn too_short_text_is_rejected() {
    assert!(matches!(identify_language("Hallo Welt", language_profiles()), Err(IngestError::TextTooShort(10))));
}

#[test]
fn digits_only_is_undetermined() {
    assert_eq!(identify_language("12345 67890 12345 67890 2024", language_profiles()).unwrap(), "und");
}
