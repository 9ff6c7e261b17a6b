//! Benchmark domains: the betting game and road-network navigation.

pub mod betting;
pub mod road;

pub use betting::{betting_bamdp, betting_game_mdp, BettingConfig};
pub use road::{road_network_bamdp, road_network_mdp, Direction, RoadEdge, RoadNetworkConfig, RoadType};
