//! Normalized red-blue ratio statistics and Rényi entropy of sky images.

use occur_solar::features::{image_features, nrbr, read_ppm, write_ppm, ImageRgb};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (64, 48);
    let clear = ImageRgb::filled(w, h, [70, 130, 220]);
    let overcast = ImageRgb::filled(w, h, [180, 180, 185]);
    // Broken cloud: blue sky with a band of grey-white cloud and some texture.
    let broken = ImageRgb::from_pixels(
        w,
        h,
        (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if (x + 2 * y) % 23 < 9 { [200 + (x % 30) as u8, 200, 205] } else { [70, 130, 220] }
            })
            .collect(),
    );
    println!("{:<10} {:>8} {:>8} {:>8}", "image", "mu", "sigma", "entropy");
    for (name, img) in [("clear", &clear), ("overcast", &overcast), ("broken", &broken)] {
        let f = image_features(img)?;
        println!("{name:<10} {:8.3} {:8.3} {:8.3}", f.mu, f.sigma, f.entropy);
    }
    println!("\nnRBR of a single blue pixel: {:.3}", nrbr([70, 130, 220]));

    let mut buf = Vec::new();
    write_ppm(&broken, &mut buf)?;
    let back = read_ppm(buf.as_slice())?;
    println!("PPM round trip: {} bytes, identical = {}", buf.len(), back == broken);
    Ok(())
}
