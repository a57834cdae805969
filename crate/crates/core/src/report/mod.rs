//! Comparison tables, difference series and plots.

pub mod comparison;
pub mod dice;
pub mod plot;
pub mod published;

pub use comparison::{render_comparison, Comparison, ComparisonRow};
pub use dice::{render_dice_comparison, DiceComparison};
pub use published::{published_dice, published_metrics, PUBLISHED_PREFIX};
