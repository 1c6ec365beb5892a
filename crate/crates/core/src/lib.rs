//! Day-ahead solar irradiance and insolation forecasting.
//!
//! Hourly irradiance is screened against physical limits, gaps are filled,
//! and the series is divided by the clear-sky model to obtain the clear-sky
//! index. ARIMA and three small neural networks then forecast one day ahead
//! over a sliding 10-day window, with every forecast scored before the model
//! learns from the day it predicted.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arima;
pub mod data_model;
pub mod imputation;
pub mod metrics;
pub mod neural;
pub mod optim;
pub mod pipeline;
pub mod quality_control;
pub mod solar_geometry;
