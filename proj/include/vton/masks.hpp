#pragma once

#include "vton/types.hpp"

namespace vton {

/// Latent-resolution region system used by the fusion sampler, with the
/// pixel-resolution inputs kept alongside.
struct RegionSet {
    GrayMask m_person;  ///< existing garment, latent cells
    GrayMask m_sketch;  ///< new item, latent cells
    GrayMask m_union;   ///< m_person ∪ m_sketch

    GrayMask person_px;
    GrayMask sketch_px;
    GrayMask union_px;

    /// Cells denoised with full conditioning.
    GrayMask synthesis() const { return m_sketch; }
    /// Cells denoised without the sketch (old garment not covered by the new one).
    GrayMask removal() const { return mask_difference(m_union, m_sketch); }
    /// Cells carried over from the person latent by re-noising.
    GrayMask preserve() const { return mask_complement(m_union); }
};

/// Stroke pixels (luma < threshold) with every region they enclose filled
/// in, after a disk closing of `close_radius` pixels: the strokes are
/// dilated, the enclosed interior filled, and the result eroded back. A blank sketch
/// gives an empty mask; callers report that as a warning.
GrayMask sketch_to_mask(const RgbImage& sketch, double stroke_threshold = 0.5, int close_radius = 3);

/// Binary stroke map before closing and filling.
GrayMask stroke_pixels(const RgbImage& sketch, double stroke_threshold = 0.5);

GrayMask dilate(const GrayMask& m, int radius);
/// Dilation followed by erosion with a disk. Pixels beyond the border do not
/// take part, so closing never removes a set pixel.
GrayMask close(const GrayMask& m, int radius);
/// Sets every pixel not 4-connected to the border through unset pixels.
GrayMask fill_enclosed(const GrayMask& m);

/// Latent cell set when any covered pixel is set. Throws InputError unless
/// the dimensions are multiples of `factor`.
GrayMask downsample_any(const GrayMask& m, int factor);

/// `person_dilation` grows the garment mask (pixels) before the union.
RegionSet compose_region_masks(const GrayMask& m_person_px, const GrayMask& m_sketch_px,
                               int spatial_factor, int person_dilation = 0);

}  // namespace vton
