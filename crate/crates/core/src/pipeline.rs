//! End-to-end hybrid transmission of a set of images: SR through the neural
//! transceiver, CR through its delivery path, recomposition at the receiver.

use ndarray::{Array2, ArrayView1};

use crate::adaptation::AdapterParameters;
use crate::channel::{equalize, transmit, ChannelMode, ChannelRealization, ChannelStreams};
use crate::codec::model::{images_to_batch, row_to_image};
use crate::codec::{from_interleaved, to_interleaved, SemanticCodec};
use crate::cr::{deliver_cr, ComplementaryPayload, CrDelivery};
use crate::error::{HscError, Result};
use crate::image::Image;
use crate::recompose::{achieved_mse, closed_form_mse, eig_psd, error_matrix, optimal_projection};

/// A codec with an optional adapter pair around it.
#[derive(Debug, Clone, Copy)]
pub struct Transceiver<'a> {
    pub codec: &'a SemanticCodec,
    pub adapters: Option<&'a AdapterParameters>,
}

impl<'a> Transceiver<'a> {
    pub fn new(codec: &'a SemanticCodec) -> Self {
        Transceiver { codec, adapters: None }
    }

    pub fn with_adapters(codec: &'a SemanticCodec, adapters: &'a AdapterParameters) -> Self {
        Transceiver {
            codec,
            adapters: Some(adapters),
        }
    }

    /// Normalized channel symbols, interleaved, one row per image.
    pub fn transmit_rows(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let z = self.codec.transmit_batch(x.view())?;
        match self.adapters {
            Some(a) => a.adapt_latent_rows(&z, self.codec.power),
            None => Ok(z),
        }
    }

    pub fn generate_rows(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        let xh = self.codec.decode_batch(y.view())?;
        Ok(match self.adapters {
            Some(a) => a.adapt_image_rows(&xh),
            None => xh,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub sr: ChannelMode,
    pub cr: ChannelMode,
    pub delivery: CrDelivery,
}

impl LinkConfig {
    pub fn error_free(delivery: CrDelivery) -> Self {
        LinkConfig {
            sr: ChannelMode::ErrorFree,
            cr: ChannelMode::ErrorFree,
            delivery,
        }
    }

    /// Same mode on both links.
    pub fn symmetric(mode: ChannelMode, delivery: CrDelivery) -> Self {
        LinkConfig {
            sr: mode,
            cr: mode,
            delivery,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub d: usize,
    pub generated: Image,
    pub recomposed: Image,
    pub mse_generated: f64,
    pub mse_recomposed: f64,
    /// Tail eigenvalue sum for the transmitter's own `X̂` (the error the
    /// receiver would see with an ideal SR link and exact CR).
    pub mse_closed_form: f64,
}

/// Transmits every image once over the SR link, then delivers its CR at each
/// rank in `ranks`. Draws for image `i` come from
/// `ChannelStreams::for_item(seed, i)`, so two calls with the same seed see
/// the same channel.
///
/// Returns `outcomes[i][j]` for image `i`, rank `ranks[j]`.
pub fn run_hsc(tx: &Transceiver<'_>, images: &[Image], ranks: &[usize], link: &LinkConfig, seed: u64) -> Result<Vec<Vec<Outcome>>> {
    if images.is_empty() {
        return Err(HscError::Empty("image set"));
    }
    let side = images[0].side();
    if let Some(&d) = ranks.iter().find(|&&d| d > side) {
        return Err(HscError::RankOutOfRange { d, max: side });
    }
    let refs: Vec<&Image> = images.iter().collect();
    let x = images_to_batch(&refs)?;
    let z = tx.transmit_rows(&x)?;
    let mirror = tx.generate_rows(&z)?;
    let power = tx.codec.power;
    let mut received = z.clone();
    let mut streams: Vec<ChannelStreams> = Vec::with_capacity(images.len());
    for (i, mut row) in received.rows_mut().into_iter().enumerate() {
        let mut s = ChannelStreams::for_item(seed, i as u64);
        let ch = ChannelRealization::draw(link.sr, power, &mut s.sr_fading)?;
        if !ch.error_free {
            let sym = from_interleaved(row.as_slice().unwrap());
            let y = equalize(&transmit(&sym, &ch, &mut s.sr_noise), &ch)?;
            row.assign(&ArrayView1::from(&to_interleaved(&y)[..]));
        }
        streams.push(s);
    }
    let generated = tx.generate_rows(&received)?;
    let mut out = Vec::with_capacity(images.len());
    for (i, img) in images.iter().enumerate() {
        let tx_view = row_to_image(mirror.row(i), side)?;
        let rx_view = row_to_image(generated.row(i), side)?;
        let spectrum = eig_psd(&error_matrix(img, &tx_view)?)?;
        let mse_generated = achieved_mse(img, &rx_view)?.per_pixel;
        let mut per_rank = Vec::with_capacity(ranks.len());
        for &d in ranks {
            let basis = optimal_projection(&spectrum, d)?;
            let projected = basis.project(img)?;
            let payload = ComplementaryPayload { basis, projected };
            let mut s = streams[i].clone();
            let ch = ChannelRealization::draw(link.cr, power, &mut s.cr_fading)?;
            let rx = deliver_cr(&payload, &link.delivery, &ch, &mut s.cr_noise)?;
            let recomposed = rx.recompose(&rx_view)?;
            per_rank.push(Outcome {
                d,
                mse_generated,
                mse_recomposed: achieved_mse(img, &recomposed)?.per_pixel,
                mse_closed_form: closed_form_mse(&spectrum, d)?.per_pixel,
                generated: rx_view.clone(),
                recomposed,
            });
        }
        out.push(per_rank);
    }
    Ok(out)
}

/// Per-pixel MSE of the generated images alone over the SR link.
pub fn sc_mse(tx: &Transceiver<'_>, images: &[Image], mode: ChannelMode, seed: u64) -> Result<f64> {
    let outcomes = run_hsc(tx, images, &[0], &LinkConfig::symmetric(mode, CrDelivery::Exact), seed)?;
    Ok(outcomes.iter().map(|o| o[0].mse_generated).sum::<f64>() / images.len() as f64)
}
