/** Decode binary PPM (P6) frames and repack them as BMP data URLs.
 *
 * Browsers render BMP natively, so the frame strip needs no canvas (which
 * also keeps the renderers testable under jsdom).
 */

export interface PpmImage {
  width: number;
  height: number;
  pixels: Uint8Array; // RGB, row-major
}

export function decodePpm(data: Uint8Array): PpmImage {
  let pos = 0;

  function token(): string {
    while (pos < data.length) {
      const c = data[pos];
      if (c === 0x23) {
        while (pos < data.length && data[pos] !== 0x0a) pos++;
      } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
        pos++;
      } else break;
    }
    const start = pos;
    while (pos < data.length) {
      const c = data[pos];
      if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) break;
      pos++;
    }
    if (start === pos) throw new Error("truncated PPM header");
    return String.fromCharCode(...data.subarray(start, pos));
  }

  const magic = token();
  if (magic !== "P6") throw new Error(`unsupported magic ${magic}`);
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0)) throw new Error("bad PPM dimensions");
  if (!(maxval > 0 && maxval < 256)) throw new Error(`maxval ${maxval} not 8-bit`);
  pos += 1; // single whitespace after maxval
  const need = width * height * 3;
  const raster = data.subarray(pos, pos + need);
  if (raster.length !== need) throw new Error("truncated PPM raster");
  return { width, height, pixels: new Uint8Array(raster) };
}

export function ppmToBmpDataUrl(data: Uint8Array): string {
  const img = decodePpm(data);
  const rowSize = Math.ceil((img.width * 3) / 4) * 4;
  const pixelBytes = rowSize * img.height;
  const fileSize = 54 + pixelBytes;
  const buf = new Uint8Array(fileSize);
  const view = new DataView(buf.buffer);

  buf[0] = 0x42; // 'B'
  buf[1] = 0x4d; // 'M'
  view.setUint32(2, fileSize, true);
  view.setUint32(10, 54, true); // pixel data offset
  view.setUint32(14, 40, true); // BITMAPINFOHEADER
  view.setInt32(18, img.width, true);
  view.setInt32(22, img.height, true); // bottom-up
  view.setUint16(26, 1, true); // planes
  view.setUint16(28, 24, true); // bpp
  view.setUint32(34, pixelBytes, true);

  for (let y = 0; y < img.height; y++) {
    const srcRow = img.height - 1 - y; // BMP rows bottom-up
    let dst = 54 + y * rowSize;
    let src = srcRow * img.width * 3;
    for (let x = 0; x < img.width; x++) {
      buf[dst++] = img.pixels[src + 2]; // B
      buf[dst++] = img.pixels[src + 1]; // G
      buf[dst++] = img.pixels[src]; // R
      src += 3;
    }
  }

  let binary = "";
  const chunk = 0x2000;
  for (let i = 0; i < buf.length; i += chunk) {
    binary += String.fromCharCode(...buf.subarray(i, i + chunk));
  }
  return `data:image/bmp;base64,${btoa(binary)}`;
}
