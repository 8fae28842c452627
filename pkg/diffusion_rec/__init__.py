"""擴散推薦（Diffusion Rec）套件。

本套件把動態二部圖、MD/HC 擴散核心、精確增量 oracle、AAF/AAS 自適應引擎、
串流評估與資料讀寫模組化，讓每一條邊的新增/刪除都能以局部更新回應，
並能隨時和靜態重算結果對照。
"""

__version__ = "0.1.0"
