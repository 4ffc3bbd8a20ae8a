//! Federated averaging with a fixed step versus learned isotropic and
//! per-coordinate steps, scored after a few local refinement steps on
//! clients never seen during training.

use aruba::federated::{payload_per_client, run_federated, FederatedConfig, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = FederatedConfig { rounds: 100, seed: 4, ..Default::default() };
    let variants = [Variant::Vanilla { eta: 0.1 }, Variant::Vanilla { eta: 1.0 }, Variant::Isotropic, Variant::PerCoordinate];
    println!("{:<28} {:>10} {:>10} {:>10} {:>12}", "variant", "pre", "post", "mean rate", "scalars");
    for variant in variants {
        let run = run_federated(&FederatedConfig { variant, ..base.clone() })?;
        let (down, up) = run.state.total_payload();
        println!(
            "{:<28} {:>10.4} {:>10.4} {:>10.4} {:>12}",
            format!("{variant:?}"),
            run.mean_pre(),
            run.mean_post(),
            run.state.rate().mean(),
            down + up
        );
    }
    let (down, up) = payload_per_client(&Variant::Isotropic, base.dim);
    println!("isotropic messages per client per round: {down} down, {up} up");
    Ok(())
}
