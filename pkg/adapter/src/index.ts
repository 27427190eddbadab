export {
  AdapterError,
  ConfigError,
  loadConfig,
  parseConfig,
  type AdapterConfig,
  type Embedder,
  type PosteriorModel,
  type RgbImage,
} from "./types.js";
export { readLibrary, type Library, type LibraryHeader } from "./library.js";
export { decodePng, encodePng } from "./png.js";
export { StubEmbedder, StubModel, type StubModelOptions } from "./stub.js";
export {
  HttpEmbedder,
  HttpModel,
  fromF32le,
  toF32le,
  type HttpModelOptions,
} from "./http.js";
export {
  createEmbedder,
  createModel,
  exportEmbeddings,
  exportPosteriors,
} from "./export.js";
