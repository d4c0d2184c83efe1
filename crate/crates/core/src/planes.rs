use crate::error::{Error, Result};

/// Model-space array `[channels, height, width]`, row-major per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Planes {
    data: Vec<f32>,
    channels: usize,
    height: usize,
    width: usize,
}

impl Planes {
    pub fn new(data: Vec<f32>, channels: usize, height: usize, width: usize) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} values for [{channels}, {height}, {width}]",
                data.len()
            )));
        }
        Ok(Planes {
            data,
            channels,
            height,
            width,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Planes {
            data: vec![0.0; channels * height * width],
            channels,
            height,
            width,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}
