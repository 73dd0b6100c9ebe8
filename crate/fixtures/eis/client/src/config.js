export const REFRESH_SECONDS = 15;
export const API_BASE = 'http://eis.internal.example/api';
export const TILE_URL = 'https://tiles.example/{z}/{x}/{y}.png';

export function apiUrl(path) {
  return `${API_BASE}/${path}`;
}
