//! Core of the downscaled-projection explorer: NetCDF classic ingest, grid
//! model, regional analytics, contour bands, the product store and the
//! data-local workflow.

pub mod netcdf;
pub mod grid;
pub mod analytics;
pub mod contour;
pub mod index;
pub mod store;
pub mod workflow;
pub mod views;
