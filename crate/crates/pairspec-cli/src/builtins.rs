//! The shipped measurement scenarios (also available as files under
//! `scenarios/` at the repository root).

pub const BUILTINS: &[(&str, &str)] = &[
    (
        "fig3_quadrupole_product",
        include_str!("../../../scenarios/fig3_quadrupole_product.scn"),
    ),
    (
        "fig4_quadrupole_product",
        include_str!("../../../scenarios/fig4_quadrupole_product.scn"),
    ),
    (
        "fig4_quadrupole_bell",
        include_str!("../../../scenarios/fig4_quadrupole_bell.scn"),
    ),
    (
        "fig6_phase_scan",
        include_str!("../../../scenarios/fig6_phase_scan.scn"),
    ),
    (
        "fig7_linewidth",
        include_str!("../../../scenarios/fig7_linewidth.scn"),
    ),
    (
        "sec41_gradient",
        include_str!("../../../scenarios/sec41_gradient.scn"),
    ),
];

pub fn names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(name, _)| *name).collect()
}

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}
