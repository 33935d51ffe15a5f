//! Fidelity metrics for synthetic gesture-video datasets.
//!
//! Compares a synthetic dataset against a real reference along several axes:
//! hand-detection confidence, Fréchet distances over image and video
//! embeddings, visual/prompt alignment and their weighted blend (GAS), motion
//! derivatives of hand landmarks, finger joint-angle divergences, and pose
//! diversity via t-SNE. [`prompt_forge`] covers the text side of generation.

pub mod data_model;
pub mod embedding_stats;
pub mod hand_geometry;
pub mod kinematics;
pub mod diversity;
pub mod prompt_forge;
pub mod fixtures;
pub mod report;
