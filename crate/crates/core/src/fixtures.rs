//! Named example models shipped as JSON data files.

use crate::model::Model;

pub const M_TOP_JSON: &str = include_str!("../fixtures/m_top.json");
pub const M_FIG1_JSON: &str = include_str!("../fixtures/m_fig1.json");
pub const M_AB_JSON: &str = include_str!("../fixtures/m_ab.json");
pub const M_AB_STRICT_JSON: &str = include_str!("../fixtures/m_ab_strict.json");
pub const M_LEFTBANG_JSON: &str = include_str!("../fixtures/m_leftbang.json");
pub const M_RIGHTBANG_JSON: &str = include_str!("../fixtures/m_rightbang.json");

fn load(text: &str) -> Model {
    Model::from_json(text).expect("bundled fixture is valid")
}

/// One state, label Σ, no transitions.
pub fn m_top() -> Model {
    load(M_TOP_JSON)
}

/// `s0:* -a-> s1:{b,c}`, `s0 -c-> s2:{}`, `s1 -b-> s3:*`.
pub fn m_fig1() -> Model {
    load(M_FIG1_JSON)
}

/// `s0:* -a-> s1:* -b-> s2:*`.
pub fn m_ab() -> Model {
    load(M_AB_JSON)
}

/// `s0:{a} -a-> s1:{b} -b-> s2:{}`.
pub fn m_ab_strict() -> Model {
    load(M_AB_STRICT_JSON)
}

/// `s0:{a} -a-> s1:*`.
pub fn m_leftbang() -> Model {
    load(M_LEFTBANG_JSON)
}

/// `s0:{a,b,c} -c-> s1:{a}`.
pub fn m_rightbang() -> Model {
    load(M_RIGHTBANG_JSON)
}

pub fn all() -> Vec<(&'static str, Model)> {
    vec![
        ("M_TOP", m_top()),
        ("M_FIG1", m_fig1()),
        ("M_AB", m_ab()),
        ("M_AB_STRICT", m_ab_strict()),
        ("M_LEFTBANG", m_leftbang()),
        ("M_RIGHTBANG", m_rightbang()),
    ]
}

pub fn by_name(name: &str) -> Option<Model> {
    all().into_iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, m)| m)
}
