use std::io;
use std::path::Path;

use autocab_core::gui::PixelBuffer;

pub fn encode_png(buf: &PixelBuffer) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, buf.width, buf.height);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(&buf.data).expect("buffer size matches dimensions");
    }
    out
}

pub fn write_png(buf: &PixelBuffer, path: &Path) -> io::Result<()> {
    std::fs::write(path, encode_png(buf))
}

pub fn decode_png(bytes: &[u8]) -> Result<PixelBuffer, png::DecodingError> {
    let mut reader = png::Decoder::new(io::Cursor::new(bytes)).read_info()?;
    let mut data = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut data)?;
    data.truncate(info.buffer_size());
    Ok(PixelBuffer { width: info.width, height: info.height, data })
}
