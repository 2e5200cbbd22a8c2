//! Build the recommender and its ablated variants, print the layer shapes,
//! parameter counts and one forward pass.

use clustsel::neuralnet::{predict, Ablation, ArchConfig, RecommenderNet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = RecommenderNet::new(ArchConfig::default(), 0)?;
    for (label, shape) in net.shape_trace()? {
        println!("{label:<10} {shape:?}");
    }

    for a in Ablation::ALL {
        let v = RecommenderNet::new(ArchConfig::default().ablated(a), 0)?;
        println!("{:<10} {} tensors, {} trainable values", a.name(), v.params.len(), v.params.iter().filter(|(_, p)| p.trainable).map(|(_, p)| p.tensor.len()).sum::<usize>());
    }

    let (_, h, w) = net.arch.in_shape;
    let x: Vec<f64> = (0..h * w).map(|i| ((i % 17) as f64 - 8.0) / 8.0).collect();
    let p = predict(&net, &[x.as_slice()])?.remove(0);
    println!("untrained scores {:.3?}, top algorithm index {}", p.scores, p.recommended);
    Ok(())
}
