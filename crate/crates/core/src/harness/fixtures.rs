//! Small hand-built models shared by tests, the CLI and the acceptance suite.

use crate::pomdp::{Belief, PomdpModel, StateComponent, StateFactors, UtilitySpec};

/// Listening accuracy of the two two-door actions.
pub const GOOD_ACCURACY: f64 = 0.85;
pub const CHEAP_ACCURACY: f64 = 0.6;

/// Two-door micro-domain: a hidden door (left/right) that never moves and two
/// listening actions of different accuracy. Observations depend on the
/// arrived-at state only, so the state also records which listening action
/// was taken last. Utility is the negative entropy of the door marginal.
pub fn two_door(discount: f64) -> PomdpModel {
    let factors = StateFactors::new(vec![
        StateComponent {
            name: "door".into(),
            values: vec!["left".into(), "right".into()],
        },
        StateComponent {
            name: "last_listen".into(),
            values: vec!["good".into(), "cheap".into()],
        },
    ]);
    let accuracy = [GOOD_ACCURACY, CHEAP_ACCURACY];
    let mut transition = Vec::new();
    let mut observation = Vec::new();
    for s in 0..4 {
        let parts = factors.decompose(s);
        let door = parts[0];
        transition.push(
            (0..2)
                .map(|a| vec![(factors.compose(&[door, a]), 1.0)])
                .collect(),
        );
        let acc = accuracy[parts[1]];
        observation.push(if door == 0 {
            vec![(0, acc), (1, 1.0 - acc)]
        } else {
            vec![(0, 1.0 - acc), (1, acc)]
        });
    }
    PomdpModel::new(
        (0..4)
            .map(|s| {
                let p = factors.decompose(s);
                format!(
                    "{}/{}",
                    factors.components[0].values[p[0]], factors.components[1].values[p[1]]
                )
            })
            .collect(),
        vec!["listen-good".into(), "listen-cheap".into()],
        vec!["hear-left".into(), "hear-right".into()],
        transition,
        observation,
        UtilitySpec::NegEntropyOverSubset { mask: vec![0] },
        discount,
        Some(factors),
    )
    .expect("two-door model is valid")
}

/// Door belief `(p_left, 1 - p_left)` expressed over the four tagged states.
pub fn two_door_belief(p_left: f64) -> Belief {
    Belief::new(vec![p_left, 0.0, 1.0 - p_left, 0.0]).expect("valid door belief")
}
