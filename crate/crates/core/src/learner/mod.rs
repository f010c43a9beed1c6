//! Online learning of a quantum state and the QPMW shadow-tomography driver.

pub mod effect;
pub mod epochs;
pub mod mmw;
pub mod qpmw;

pub use effect::{load_stream, random_projective_stream, QubitEffect};
pub use epochs::{damage_bounds, epoch_segmentation, epoch_update_probability};
pub use mmw::{
    default_eta, default_update_cap, greedy_mistakes, greedy_mistakes_random, mistake_bound,
    online_learn, online_update, worst_effect, HypothesisState, MistakeRun,
};
pub use qpmw::{
    accumulation_violations, check_for_update, coupling_summary, db_size, default_mu, qpmw_run,
    CheckOutcome, CouplingSummary, EpochWindow, Mode, QpmwParams, QpmwTranscript, RoundRecord,
    MAX_JOINT_QUBITS,
};

/// Per-round median of the answers of independent runs over the same stream.
pub fn median_answers(runs: &[QpmwTranscript]) -> Vec<Option<f64>> {
    let len = runs.iter().map(|r| r.rounds.len()).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let mut a: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.rounds.get(t).and_then(|x| x.answer))
                .collect();
            if a.is_empty() {
                return None;
            }
            a.sort_by(f64::total_cmp);
            let k = a.len();
            Some(if k % 2 == 1 {
                a[k / 2]
            } else {
                0.5 * (a[k / 2 - 1] + a[k / 2])
            })
        })
        .collect()
}
