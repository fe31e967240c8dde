/**
 * Binary raster wire format: u32 LE header length, UTF-8 JSON header
 * {width, height, value_range}, float32 LE row-major pixels.
 */

export interface RasterHeader {
  width: number;
  height: number;
  value_range: [number, number];
}

export interface DecodedRaster {
  header: RasterHeader;
  values: Float32Array;
}

export function decodeRaster(buf: ArrayBuffer): DecodedRaster {
  if (buf.byteLength < 4) {
    throw new Error("raster payload too short");
  }
  const view = new DataView(buf);
  const headerLen = view.getUint32(0, true);
  if (4 + headerLen > buf.byteLength) {
    throw new Error("raster header length exceeds payload");
  }
  const headerText = new TextDecoder("utf-8").decode(new Uint8Array(buf, 4, headerLen));
  const header = JSON.parse(headerText) as RasterHeader;
  // slice copies, which also realigns the float view
  const values = new Float32Array(buf.slice(4 + headerLen));
  if (values.length !== header.width * header.height) {
    throw new Error(
      `raster payload has ${values.length} values, header says ` +
        `${header.width}x${header.height}`,
    );
  }
  return { header, values };
}
