//! Score fusion and ensemble component selection over a table of calibrated
//! probabilities: average and vote fusion, then greedy and forward selection
//! with their iteration traces.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dermoscopy::ensemble::{
    average_fusion, forward_selection, greedy_selection, vote_fusion, ComponentKey, ScoreTable,
};

fn main() -> dermoscopy::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let n = 48;
    let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();

    // components of varying quality: a strong one, two mediocre, one noise
    let quality = [0.9, 0.65, 0.6, 0.0];
    let components = vec![
        ComponentKey::new("CRGT", "sc_rgb"),
        ComponentKey::new("CRGT", "color_hist"),
        ComponentKey::new("WI", "mslbp"),
        ComponentKey::new("WI", "edge_hist"),
    ];
    let scores: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            quality
                .iter()
                .map(|&q| {
                    let signal = if labels[i] { 0.75 } else { 0.25 };
                    let noise: f64 = rng.gen();
                    (q * signal + (1.0 - q) * noise).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();
    let ids: Vec<String> = (0..n).map(|i| format!("s{i:02}")).collect();
    let table = ScoreTable::new(ids, components, scores, Some(labels))?;

    let all: Vec<usize> = (0..table.components.len()).collect();
    let avg = average_fusion(&table, &all)?;
    let vote = vote_fusion(&table, &all, 0.5)?;
    println!(
        "fusion of sample 0: average {:.3}, positive-vote fraction {:.2}",
        avg[0], vote[0]
    );

    let greedy = greedy_selection(&table, 3, 5)?;
    println!("\ngreedy ranking (individual AP, cumulative AP):");
    for step in &greedy.steps {
        println!(
            "  {:<18} {:.3}  {:.3}",
            step.component.id(),
            step.individual_ap,
            step.cumulative_ap
        );
    }
    let kept: Vec<String> = greedy.selected.iter().map(|&i| table.components[i].id()).collect();
    println!("greedy keeps: {}", kept.join(", "));

    let forward = forward_selection(&table, 3, 5)?;
    println!("\nforward selection ({} iterations):", forward.iterations.len());
    for (k, iteration) in forward.iterations.iter().enumerate() {
        match iteration.chosen {
            Some(c) => {
                let ap = iteration.candidate_ap.iter().find(|(i, _)| *i == c).unwrap().1;
                println!(
                    "  iteration {}: added {} (ensemble AP {:.3})",
                    k + 1,
                    table.components[c].id(),
                    ap
                );
            }
            None => println!("  iteration {}: no candidate improves, stopping", k + 1),
        }
    }
    println!("forward final AP: {:.3}", forward.final_ap);
    Ok(())
}
