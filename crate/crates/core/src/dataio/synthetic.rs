//! Seeded stand-ins for the real corpora.

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::dense::DenseDataset;
use super::tabular::{Cell, Column, TabularFrame};
use crate::error::{Error, Result};
use crate::seed;

/// Linear-teacher binary dataset.
///
/// A hidden unit vector `w*` is drawn first; each row has standard normal
/// features and label `1` iff `<w*, x> + noise > 0`, with noise standard
/// deviation `1 / (1 + separation)`.
pub fn generate_synthetic(
    num_rows: usize,
    num_features: usize,
    separation: f64,
    seed: u64,
) -> Result<DenseDataset> {
    if num_rows < 2 || num_features < 1 {
        return Err(Error::config(format!(
            "need at least 2 rows and 1 feature, got {num_rows}x{num_features}"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::config(format!("separation must be finite and >= 0, got {separation}")));
    }
    let mut rng = seed::rng(seed);
    let mut teacher: Vec<f64> = (0..num_features).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = teacher.iter().map(|v| v * v).sum::<f64>().sqrt();
    teacher.iter_mut().for_each(|v| *v /= norm);
    let noise_scale = 1.0 / (1.0 + separation);

    let mut values = Vec::with_capacity(num_rows * num_features);
    let mut labels = Vec::with_capacity(num_rows);
    for _ in 0..num_rows {
        let mut score = 0.0;
        for w in &teacher {
            let x: f64 = StandardNormal.sample(&mut rng);
            score += w * x;
            values.push(x);
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        labels.push(if score + noise_scale * noise > 0.0 { 1.0 } else { 0.0 });
    }
    let features = Array2::from_shape_vec((num_rows, num_features), values)
        .map_err(|e| Error::data(e.to_string()))?;
    DenseDataset::new(features, labels)
}

const GENRES: &[(&str, f64)] = &[
    ("Drama", 0.4),
    ("Comedy", -0.3),
    ("Horror", -0.9),
    ("Action", -0.2),
    ("Romance", 0.0),
    ("Thriller", -0.1),
    ("War", 0.5),
    ("Biography", 0.6),
    ("History", 0.5),
    ("Film-Noir", 0.7),
    ("Animation", 0.3),
];
const FIRST: &[&str] = &[
    "Ana", "Luis", "Mara", "Tom", "Ines", "Kenji", "Olga", "Raul", "Sara", "Ivan", "Noor", "Pablo",
];
const LAST: &[&str] = &[
    "Ortega", "Nolan", "Ray", "Miyazaki", "Silva", "Berg", "Kowal", "Duarte", "Lind", "Moreau",
];
const STUDIOS: &[&str] = &["Lumen", "Northlight", "Casa Azul", "Red Pine", "Okra Films", "Vesta"];
const NOUNS: &[&str] = &[
    "city", "river", "family", "detective", "soldier", "village", "dream", "secret", "journey",
    "winter", "island", "letter", "machine", "garden", "road",
];
const POSITIVE: &[&str] = &["beautiful", "brilliant", "moving", "hopeful", "charming", "triumphant"];
const NEGATIVE: &[&str] = &["dull", "bleak", "cruel", "tragic", "messy", "grim"];

fn person(rng: &mut seed::Rng) -> String {
    format!("{} {}", FIRST.choose(rng).unwrap(), LAST.choose(rng).unwrap())
}

/// Column layout written by [`generate_movies`].
pub fn movie_schema() -> Vec<Column> {
    vec![
        Column::text("title"),
        Column::number("year"),
        Column::text("genre"),
        Column::number("duration"),
        Column::text("director"),
        Column::text("writer"),
        Column::text("production_company"),
        Column::text("actors"),
        Column::text("description"),
        Column::text("budget"),
        Column::number("votes"),
        Column::number("reviews_from_users"),
        Column::number("reviews_from_critics"),
        Column::number("avg_vote"),
    ]
}

/// Movie-metadata table in the raw IMDb shape.
///
/// Columns: title, year, genre, duration, director, writer,
/// production_company, actors, description, budget (raw currency text),
/// votes, reviews_from_users, reviews_from_critics, avg_vote (the target).
/// Review counts are missing for roughly 12% of rows.
pub fn generate_movies(num_rows: usize, seed: u64) -> Result<TabularFrame> {
    if num_rows == 0 {
        return Err(Error::config("num_rows must be positive"));
    }
    let mut rng = seed::rng(seed);
    let directors: Vec<(String, f64)> = (0..40)
        .map(|_| (person(&mut rng), rng.random_range(-1.2..1.2)))
        .collect();
    let columns = movie_schema();
    let mut frame = TabularFrame::new(columns);
    for i in 0..num_rows {
        let (director, dir_effect) = directors.choose(&mut rng).unwrap().clone();
        let n_genres = rng.random_range(1..=2);
        let genres: Vec<&(&str, f64)> = GENRES.choose_multiple(&mut rng, n_genres).collect();
        let genre_effect = genres.iter().map(|g| g.1).sum::<f64>() / n_genres as f64;
        let year = rng.random_range(1930..=2020) as f64;
        let duration = rng.random_range(75..=180) as f64;
        let votes = (rng.random_range(3.0f64..12.0)).exp().round();
        let noise: f64 = StandardNormal.sample(&mut rng);
        let rating = (6.0 + dir_effect + genre_effect + 0.08 * votes.ln() + 0.002 * (duration - 100.0)
            + 0.35 * noise)
            .clamp(1.0, 10.0);
        let rating = (rating * 10.0).round() / 10.0;

        let tone = if rating > 6.8 { POSITIVE } else if rating < 5.5 { NEGATIVE } else { NOUNS };
        let description = format!(
            "A {} story about a {} and the {} {}.",
            tone.choose(&mut rng).unwrap(),
            NOUNS.choose(&mut rng).unwrap(),
            NOUNS.choose(&mut rng).unwrap(),
            tone.choose(&mut rng).unwrap(),
        );
        let actors = (0..3).map(|_| person(&mut rng)).collect::<Vec<_>>().join(", ");
        let budget = match rng.random_range(0..10) {
            0 => Cell::Missing,
            1 => Cell::Text(format!("ITL {}", group_thousands(rng.random_range(100..9000) * 1000))),
            _ => Cell::Text(format!("${}", group_thousands(rng.random_range(50..5000) * 1000))),
        };
        let mut reviews = |scale: f64| {
            if rng.random_bool(0.12) {
                Cell::Missing
            } else {
                Cell::Number((votes.sqrt() * scale).round())
            }
        };
        let users = reviews(0.8);
        let critics = reviews(0.3);
        frame.push_row(vec![
            Cell::Text(format!("The {} {}", NOUNS.choose(&mut rng).unwrap(), i)),
            Cell::Number(year),
            Cell::Text(genres.iter().map(|g| g.0).collect::<Vec<_>>().join(", ")),
            Cell::Number(duration),
            Cell::Text(director),
            Cell::Text(person(&mut rng)),
            Cell::Text(STUDIOS.choose(&mut rng).unwrap().to_string()),
            Cell::Text(actors),
            Cell::Text(description),
            budget,
            Cell::Number(votes),
            users,
            critics,
            Cell::Number(rating),
        ])?;
    }
    Ok(frame)
}

fn group_thousands(mut n: u64) -> String {
    let mut groups = Vec::new();
    loop {
        if n < 1000 {
            groups.push(n.to_string());
            break;
        }
        groups.push(format!("{:03}", n % 1000));
        n /= 1000;
    }
    groups.reverse();
    groups.join(",")
}

const REVIEW_WORDS: [&[&str]; 5] = [
    &["terrible", "dirty", "rude", "awful", "never"],
    &["bad", "slow", "noisy", "cold", "disappointing"],
    &["okay", "average", "normal", "fine", "acceptable"],
    &["good", "nice", "friendly", "clean", "tasty"],
    &["excellent", "wonderful", "amazing", "perfect", "unforgettable"],
];
const REVIEW_FILLER: &[&str] = &["the", "hotel", "room", "food", "staff", "beach", "museum", "service", "was", "very"];

/// Polarity-labelled reviews (labels 1..=5) skewed toward 5 like tourism data.
///
/// About 3% of rows duplicate an earlier review and about 2% are one-word.
pub fn generate_reviews(num_rows: usize, seed: u64) -> Vec<(String, u8)> {
    // class proportions of a large tourism-review corpus
    const WEIGHTS: [f64; 5] = [5441.0, 5496.0, 15519.0, 45034.0, 136561.0];
    let total: f64 = WEIGHTS.iter().sum();
    let mut rng = seed::rng(seed);
    let mut out: Vec<(String, u8)> = Vec::with_capacity(num_rows);
    for _ in 0..num_rows {
        if !out.is_empty() && rng.random_bool(0.03) {
            let dup = out[rng.random_range(0..out.len())].clone();
            out.push(dup);
            continue;
        }
        let mut u = rng.random_range(0.0..total);
        let mut label = 5u8;
        for (k, w) in WEIGHTS.iter().enumerate() {
            if u < *w {
                label = k as u8 + 1;
                break;
            }
            u -= w;
        }
        let words = REVIEW_WORDS[label as usize - 1];
        if rng.random_bool(0.02) {
            out.push((words.choose(&mut rng).unwrap().to_string(), label));
            continue;
        }
        let len = rng.random_range(5..12);
        let text: Vec<&str> = (0..len)
            .map(|_| {
                if rng.random_bool(0.35) {
                    *words.choose(&mut rng).unwrap()
                } else {
                    *REVIEW_FILLER.choose(&mut rng).unwrap()
                }
            })
            .collect();
        out.push((text.join(" "), label));
    }
    out
}
