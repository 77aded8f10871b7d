use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geo(#[from] scatter_geomodel::GeoError),
    #[error(transparent)]
    Field(#[from] scatter_fields::FieldError),
}
