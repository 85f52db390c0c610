//! Runs the default configuration and prints the headline numbers.

use fedrep::{run_simulation, Role, SystemConfig};

fn main() {
    let cfg = SystemConfig::default().validate().expect("defaults are valid");
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(cfg.seed);
    let result = run_simulation(&cfg, seed).expect("default run succeeds");
    let s = &result.summary;
    let malicious: Vec<usize> = (0..s.roles.len()).filter(|&i| s.roles[i] == Role::Malicious).collect();
    let caught = |by: u32| malicious.iter().filter(|&&i| s.first_detection[i].is_some_and(|t| t <= by)).count();
    let early: usize = result.records.iter().take(cfg.eta_switch as usize).map(|r| r.detected.len()).sum();

    println!("seed                      {seed}");
    println!("honest / malicious reward {:.3}", s.reward_ratio.unwrap_or(f64::INFINITY));
    println!("honest mean reputation    {:.2}", s.honest_mean_reputation);
    println!("malicious mean reputation {:.2}", s.malicious_mean_reputation);
    println!("gini (all / honest)       {:.4} / {:.4}", s.gini_final, s.gini_honest);
    println!("detections before switch  {early}");
    println!("malicious caught by η+3   {}/{}", caught(cfg.eta_switch + 3), malicious.len());
    println!("malicious caught overall  {}/{}", caught(cfg.rounds), malicious.len());
}
