//! Shared constructions for the unit tests.

use crate::bundle::{parse_components, CoordinateChange, CHART_CERTIFY_SAMPLES};
use crate::connections::{DynamicEquation, ReferenceFrame};
use crate::expr::Expression;
use crate::sample::SampleBox;

pub fn eq_from(sources: &[&str]) -> DynamicEquation {
    let m = sources.len();
    let comps = sources
        .iter()
        .map(|s| Expression::parse(s, m).unwrap())
        .collect();
    DynamicEquation::from_expressions(comps).unwrap()
}

pub fn frame_from(sources: &[&str]) -> ReferenceFrame {
    let m = sources.len();
    let comps = sources
        .iter()
        .map(|s| Expression::parse(s, m).unwrap())
        .collect();
    ReferenceFrame::from_expressions(comps).unwrap()
}

/// The uniformly rotating observer family in inertial coordinates.
pub fn rotating_frame(omega: f64) -> ReferenceFrame {
    frame_from(&[&format!("-{omega}*q2"), &format!("{omega}*q1")])
}

/// Chart from inertial to co-rotating coordinates: q' = R(omega t) q.
pub fn rotation_chart(omega: f64) -> CoordinateChange {
    let fwd = [
        format!("q1*cos({omega}*t) + q2*sin({omega}*t)"),
        format!("-q1*sin({omega}*t) + q2*cos({omega}*t)"),
    ];
    let inv = [
        format!("q1*cos({omega}*t) - q2*sin({omega}*t)"),
        format!("q1*sin({omega}*t) + q2*cos({omega}*t)"),
    ];
    CoordinateChange::new(
        parse_components(&[&fwd[0], &fwd[1]], 2).unwrap(),
        parse_components(&[&inv[0], &inv[1]], 2).unwrap(),
        0.0,
        &SampleBox::standard(2),
        CHART_CERTIFY_SAMPLES,
    )
    .unwrap()
}

/// Chart from co-rotating (adapted) to inertial coordinates; the forward leg
/// maps the rotating observer's rest coordinates into the inertial ones, and
/// the matching frame is [`rotating_frame`].
pub fn rotation_chart_from_adapted(omega: f64) -> CoordinateChange {
    rotation_chart(omega).inverse_change()
}
