"""
Reilly型恒等式 数値検証ワークベンチ

空間形（ユークリッド・双曲・球面）および共形計量の星形領域を離散化し、
一般化Reilly恒等式・Heintze-Karcher型不等式・Minkowski恒等式・
Alexandrov型等式連鎖をメッシュ収束の証拠つきで検証するパッケージ
"""

__version__ = "0.1.0"
__author__ = "Reilly Workbench Team"
