export * from './types.js';
export * from './api.js';
export * from './viewModel.js';
export * from './replay.js';
export * from './rehearse.js';
