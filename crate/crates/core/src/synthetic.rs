//! The bundled six-party, five-issue synthetic game (option counts 5, 4, 4, 3, 3).

use crate::game::GameConfig;

pub const SYNTHETIC_GAME_JSON: &str = include_str!("../../../games/synthetic.json");

pub fn synthetic_game() -> GameConfig {
    GameConfig::from_json_str(SYNTHETIC_GAME_JSON).expect("bundled synthetic game is valid")
}
