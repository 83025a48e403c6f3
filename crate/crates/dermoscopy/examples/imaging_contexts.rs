//! Decode an image, convert color spaces, and build the two-context crops
//! (whole image and tight lesion crop) from a segmentation mask.

use dermoscopy::imaging::{
    crop, decode_image, mask_bbox, normalize_mask, resize_bilinear, rgb_to_hsv, six_channel,
    MaskImage, MASK_THRESHOLD,
};

fn main() -> dermoscopy::Result<()> {
    // a tiny PPM with a bright red square on a dark background
    let (w, h) = (12usize, 10usize);
    let mut ppm = format!("P6\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            if (3..8).contains(&x) && (2..7).contains(&y) {
                ppm.extend_from_slice(&[200, 30, 40]);
            } else {
                ppm.extend_from_slice(&[25, 20, 20]);
            }
        }
    }
    let image = decode_image(&ppm)?;
    println!("decoded {}x{} RGB image", image.width, image.height);

    let hsv = rgb_to_hsv(&image)?;
    println!("lesion pixel hue: {:.3} (red is near 0)", hsv.get(5, 4, 0));
    let six = six_channel(&image)?;
    println!("six-channel tensor has {} planes", six.channels());

    // a mask marking the square, as a segmenter would produce
    let mask_values: Vec<u8> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if (3..8).contains(&x) && (2..7).contains(&y) {
                255
            } else {
                0
            }
        })
        .collect();
    let mask = MaskImage::new(w, h, mask_values)?;
    let bbox = mask_bbox(&mask, MASK_THRESHOLD)?;
    println!(
        "tight bounding box: ({}, {}) to ({}, {})",
        bbox.x0, bbox.y0, bbox.x1, bbox.y1
    );
    let lesion = crop(&image, bbox)?;
    println!("lesion context: {}x{}", lesion.width, lesion.height);
    let resized = resize_bilinear(&lesion, 128, 128)?;
    println!("resized for downstream features: {}x{}", resized.width, resized.height);

    let grid = normalize_mask(&mask);
    println!(
        "mask normalization endpoints: background {} -> {:.2}, lesion 255 -> {:.2}",
        mask.get(0, 0),
        grid[0],
        grid[2 * w + 3]
    );
    Ok(())
}
