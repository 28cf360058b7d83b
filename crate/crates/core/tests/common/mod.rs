#![allow(dead_code)]

use sentinet::embeddings::EmbeddingTable;
use sentinet::numerics::{Matrix, RngState};
use sentinet::text::{CleanExample, Language};

/// Two word classes whose embeddings are noise plus a weak signed class
/// direction; every example draws all of its tokens from one class, so the
/// mean embedding separates the labels along that direction while a random
/// projection does not.
pub fn separable_corpus(
    language: Language,
    examples: usize,
    dim: usize,
    seed: u64,
) -> (EmbeddingTable<f32>, Vec<CleanExample>) {
    let mut rng = RngState::new(seed);
    let per_class = 8;
    let mut words = Vec::new();
    let mut data = Vec::new();
    let direction: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    for class in 0..2 {
        let sign = if class == 1 { 1.0 } else { -1.0 };
        for w in 0..per_class {
            words.push(format!("{}{class}_{w}", language.as_str()));
            for d in &direction {
                data.push((0.3 * sign * d + rng.uniform_in(-1.0, 1.0)) as f32);
            }
        }
    }
    let table = EmbeddingTable::new(
        words.clone(),
        Matrix::from_vec(2 * per_class, dim, data).unwrap(),
    )
    .unwrap();
    let corpus = (0..examples)
        .map(|i| {
            let label = (i % 2) as u8;
            let len = 2 + rng.below(4);
            let tokens = (0..len)
                .map(|_| words[label as usize * per_class + rng.below(per_class)].clone())
                .collect();
            CleanExample {
                id: format!("{}-{i:03}", language.as_str()),
                tokens,
                label,
                language,
            }
        })
        .collect();
    (table, corpus)
}
